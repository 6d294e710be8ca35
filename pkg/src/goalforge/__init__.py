"""Goal-conditioned force planning, simulation and control-signal encoding for synthetic physics videos."""

from .control import ControlTensor, EncodingCfg, MaskPolicy, assemble, read_tensor, write_tensor
from .datagen import DomainCfg, SplitSpec, gen_blocker_scene, gen_scene, generate_dataset
from .errors import GoalForgeError
from .evaluation import diversity_score, jsd, planning_accuracy, speed_ordering_check
from .physics import Ball, Domino, ForceSpec, Obstacle, Scene, SwayOscillator, elastic_collision, simulate
from .planner import GoalForceSpec, plan_goal_force, sample_plans

__version__ = "0.1.0"

__all__ = [
    "Ball", "ControlTensor", "Domino", "DomainCfg", "EncodingCfg", "ForceSpec", "GoalForceSpec", "GoalForgeError",
    "MaskPolicy", "Obstacle", "Scene", "SplitSpec", "SwayOscillator", "assemble", "diversity_score",
    "elastic_collision", "gen_blocker_scene", "gen_scene", "generate_dataset", "jsd", "plan_goal_force",
    "planning_accuracy", "read_tensor", "sample_plans", "simulate", "speed_ordering_check", "write_tensor",
]

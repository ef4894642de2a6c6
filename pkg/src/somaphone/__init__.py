"""somaphone: breathing-pillow instrument simulator and performance engine."""

__version__ = "0.1.0"

from .errors import SomaphoneError
from .scene import SceneConfig, load_scene, scene_from_dict
from .runtime import (LiveRuntime, offline_render, replay_render,
                      run_control_loop, simulate_breath)

__all__ = [
    "__version__",
    "SomaphoneError",
    "SceneConfig",
    "load_scene",
    "scene_from_dict",
    "LiveRuntime",
    "offline_render",
    "replay_render",
    "run_control_loop",
    "simulate_breath",
]

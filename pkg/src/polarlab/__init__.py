"""Polar-code toolkit over finite fields: channels, kernels, processes, codes."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .gf import Field, get_field
from .channel import Dmc, make_channel, params
from .kernel import Kernel, arikan, distances, g_barg, g_ye
from .transform import synthesize
from .construct import CodeSpec, build_frozen, build_pruned

__all__ = [
    "BACKEND",
    "CodeSpec",
    "Dmc",
    "Field",
    "Kernel",
    "__version__",
    "arikan",
    "build_frozen",
    "build_pruned",
    "distances",
    "g_barg",
    "g_ye",
    "get_field",
    "make_channel",
    "params",
    "synthesize",
]

"""Benchmark targets and their mass recipes."""

from sshmc.models.funnel import make_funnel
from sshmc.models.gaussian import make_gaussian_toy
from sshmc.models.hblr import make_hblr
from sshmc.models.lgcpp import make_lgcpp
from sshmc.models.sv import make_sv

__all__ = ["make_funnel", "make_gaussian_toy", "make_hblr", "make_lgcpp", "make_sv"]

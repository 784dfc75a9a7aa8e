"""Integrators, benchmark full-order models, lifting maps and noise models."""

from .integrators import *  # noqa: F401,F403
from .models import *  # noqa: F401,F403
from .noise import *  # noqa: F401,F403
from .io import *  # noqa: F401,F403

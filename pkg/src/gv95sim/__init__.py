"""Monte Carlo model of an orthogonal-state QKD link over a phase-stabilized
fiber Mach-Zehnder interferometer."""

from .analysis import *  # noqa: F401,F403
from .attacks import *  # noqa: F401,F403
from .config import *  # noqa: F401,F403
from .hardware import *  # noqa: F401,F403
from .optics import *  # noqa: F401,F403
from .protocol import *  # noqa: F401,F403
from .rng import *  # noqa: F401,F403
from .session import *  # noqa: F401,F403
from .stabilization import *  # noqa: F401,F403

__version__ = "0.1.0"

"""Semi-supervised segmentation with multi-view co-training and a promptable
distillation teacher. The heavy lifting lives in the C++ extension."""

import torch as _torch  # noqa: F401  -- loads the shared libraries _core links against

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401

PACKAGE_NAME = "ReadTheFaultsIn"
__version__ = "0.1.0"

from . import signalgen, imaging, episodes, net, adapt, metalearn, evalcli
from .config import PipelineConfig, default_config, load_config, noise_regime

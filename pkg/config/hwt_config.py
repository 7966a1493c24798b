"""
Project constants. Edit values here rather than in the modules.
"""
import os

from src.errors import ParameterError

# logging
LOG_DIR = './project_logs'
LOG_FILE = os.path.join(LOG_DIR, 'hwt.log')

# transforms
MAX_LEVELS = 20
FLOAT_FORMAT = '%.17g'

# quantum experiments
PATCH_SIZE = 4
DEFAULT_SHOTS = 20000
NOISE_PROBS = (0.01, 0.05, 0.1)
NOISE_TRIALS = 1000

# seeds
DEFAULT_SEED = 0
SEED_ENV_VAR = 'HWT_SEED'

# layer initialization
INIT_THRESHOLD = 0.01

# toy training
TRAIN_EPOCHS = 200
TRAIN_LR = 0.05
TRAIN_BATCH_SIZE = 20
TRAIN_SAMPLES = 200
TRAIN_PATCH_SIZE = 8
TRAIN_CHANNELS = 4
TRAIN_PATHS = 2
TRAIN_NOISE_STD = 0.05

# CIFAR ResNet-20: (name, C_in, C_out, spatial side) per 3x3 conv, in order.
# Stages of three basic blocks, two convs each, 16/32/64 channels at 32/16/8.
RESNET20_STEM = ('conv1', 3, 16, 32)
RESNET20_STAGES = ((16, 32), (32, 16), (64, 8))
RESNET20_BLOCKS_PER_STAGE = 3
RESNET20_CLASSES = 10


def default_seed() -> int:
    """
    Seed used when a command is not given one explicitly.

    Returns:
        int: value of the HWT_SEED environment variable, or DEFAULT_SEED.

    Raises:
        ParameterError: if HWT_SEED is set but is not an integer.
    """
    raw = os.environ.get(SEED_ENV_VAR, '')
    if raw == '':
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise ParameterError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from None

"""
Configuration loading from environment variables.
"""
import os
from dotenv import load_dotenv

# Load .env.local if it exists
load_dotenv('.env.local')
load_dotenv()  # Also load .env if it exists


class Config:
    """Application configuration loaded from environment variables."""

    # Data locations
    DATA_PATH: str = os.getenv('STS_DATA', '')
    EMBEDDINGS_PATH: str = os.getenv('STS_EMBEDDINGS', '')
    EMBEDDINGS_FORMAT: str = os.getenv('STS_EMBEDDINGS_FORMAT', 'auto')  # auto, text or binary
    SPLIT_STRATEGY: str = os.getenv('STS_SPLIT', 'file')  # file or firstn

    # Model shape
    WINDOW: int = int(os.getenv('STS_WINDOW', '5'))
    FILTERS: int = int(os.getenv('STS_FILTERS', '300'))
    HIDDEN: int = int(os.getenv('STS_HIDDEN', '50'))
    INIT_STDDEV: float = float(os.getenv('STS_INIT_STDDEV', '0.05'))
    FORGET_BIAS: float = float(os.getenv('STS_FORGET_BIAS', '2.5'))

    # Training
    EPOCHS: int = int(os.getenv('STS_EPOCHS', '25'))
    BATCH_SIZE: int = int(os.getenv('STS_BATCH_SIZE', '32'))
    LR_SCALE: float = float(os.getenv('STS_LR_SCALE', '0.01'))
    RHO: float = float(os.getenv('STS_RHO', '0.95'))
    EPSILON: float = float(os.getenv('STS_EPSILON', '1e-6'))
    SEED: int = int(os.getenv('STS_SEED', '1234'))
    PATIENCE: int = int(os.getenv('STS_PATIENCE', '5'))
    WORKERS: int = int(os.getenv('STS_WORKERS', '1'))
    CLIP_NORM: float = float(os.getenv('STS_CLIP_NORM', '0'))  # 0 disables clipping

    # Out-of-vocabulary handling
    OOV_POLICY: str = os.getenv('STS_OOV_POLICY', 'hashed')  # hashed or zero
    OOV_SEED: int = int(os.getenv('STS_OOV_SEED', '7'))

    # Calibration
    BANDWIDTH: float = float(os.getenv('STS_BANDWIDTH', '0.25'))

    @classmethod
    def validate(cls) -> bool:
        """
        Validate that configured values are in range.

        Returns:
            True if every setting is usable, False otherwise.
        """
        problems = []
        if cls.WINDOW < 1 or cls.WINDOW % 2 == 0:
            problems.append(f"STS_WINDOW={cls.WINDOW} (must be odd and positive)")
        if cls.FILTERS < 0:
            problems.append(f"STS_FILTERS={cls.FILTERS} (must be non-negative, 0 for no filter bank)")
        for name, value in (
            ('STS_HIDDEN', cls.HIDDEN),
            ('STS_EPOCHS', cls.EPOCHS),
            ('STS_BATCH_SIZE', cls.BATCH_SIZE),
            ('STS_WORKERS', cls.WORKERS),
        ):
            if value < 1:
                problems.append(f"{name}={value} (must be positive)")
        if cls.LR_SCALE < 0:
            problems.append(f"STS_LR_SCALE={cls.LR_SCALE} (must be non-negative)")
        if cls.CLIP_NORM < 0:
            problems.append(f"STS_CLIP_NORM={cls.CLIP_NORM} (must be non-negative)")
        if not 0.0 < cls.RHO < 1.0:
            problems.append(f"STS_RHO={cls.RHO} (must be in (0, 1))")
        if cls.EPSILON <= 0:
            problems.append(f"STS_EPSILON={cls.EPSILON} (must be positive)")
        if cls.INIT_STDDEV <= 0:
            problems.append(f"STS_INIT_STDDEV={cls.INIT_STDDEV} (must be positive)")
        if not 0.0 < cls.BANDWIDTH <= 1.0:
            problems.append(f"STS_BANDWIDTH={cls.BANDWIDTH} (must be in (0, 1])")
        if cls.EMBEDDINGS_FORMAT not in ('auto', 'text', 'binary'):
            problems.append(f"STS_EMBEDDINGS_FORMAT={cls.EMBEDDINGS_FORMAT}")
        if cls.SPLIT_STRATEGY not in ('file', 'firstn'):
            problems.append(f"STS_SPLIT={cls.SPLIT_STRATEGY}")
        if cls.OOV_POLICY not in ('hashed', 'zero'):
            problems.append(f"STS_OOV_POLICY={cls.OOV_POLICY}")

        if problems:
            print(f"❌ Invalid configuration: {', '.join(problems)}")
            return False

        return True

    @classmethod
    def get_config(cls) -> 'Config':
        """
        Get a Config instance.

        Returns:
            Config instance with loaded values.
        """
        return cls()


def load_config() -> Config:
    """
    Load and validate configuration.

    Returns:
        Config instance.

    Raises:
        ValueError: If a configured value is out of range.
    """
    config = Config.get_config()
    if not config.validate():
        raise ValueError("Invalid configuration. Check STS_* environment variables.")
    return config

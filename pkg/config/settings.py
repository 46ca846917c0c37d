"""
Configuration settings for occukit.
Loads values from .env file and provides typed access.
"""

import os
from dataclasses import dataclass, field
from dotenv import load_dotenv

# Determine project root
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
env_path = os.path.join(project_root, ".env")
load_dotenv(env_path)


@dataclass
class Settings:
    """Application settings loaded from environment variables."""

    # Worker threads for per-frame stages (1 = reference mode)
    threads: int = field(
        default_factory=lambda: max(1, int(os.getenv("OCCUKIT_THREADS") or "1"))
    )

    # Default seed for fixtures, weight init and gradcheck
    seed: int = field(
        default_factory=lambda: int(os.getenv("OCCUKIT_SEED") or "0")
    )

    # Paths
    output_dir: str = field(
        default_factory=lambda: os.getenv("OCCUKIT_OUTPUT_DIR") or "output"
    )
    class_table_path: str = field(
        default_factory=lambda: os.getenv(
            "OCCUKIT_CLASS_TABLE",
            os.path.join(project_root, "config", "class_tables.yaml"),
        )
    )
    default_config_path: str = field(
        default_factory=lambda: os.path.join(project_root, "config", "omnihd.json")
    )

    # Feature Flags
    verbose: bool = field(
        default_factory=lambda: (os.getenv("OCCUKIT_VERBOSE") or "false").lower() == "true"
    )


# Singleton instance
settings = Settings()

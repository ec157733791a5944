"""
Configuration management for the application.
Handles loading, saving, and accessing numeric settings.
"""
import copy
import json
import yaml
from pathlib import Path
from typing import Any, Dict, Optional
from src.utils.logging_utils import get_logger


logger = get_logger("config")


class ConfigManager:
    """Manages numeric and runtime configuration with dot-notation access."""

    DEFAULT_CONFIG = {
        "quadrature": {
            "rel_tol": 1e-10,
            "abs_tol": 1e-12,
            "max_subdivisions": 200,
        },
        "root": {
            "x_tol": 1e-14,
            "f_tol": 1e-9,
            "max_iter": 200,
        },
        "simulation": {
            "steps_per_period": 10000,
            "event_tol": 1e-10,
            "timeout_factor": 20.0,
        },
        "oracle": {
            "steps": 2000,
            "penalty_weights": [10.0, 100.0, 1000.0, 10000.0],
            "max_outer": 30,
            "max_iters": 3000,
            "grad_tol": 1e-10,
            "terminal_tol": 1e-6,
            "shape_tol": 0.1,
        },
        "validate": {
            "tol": 0.02,
        },
        "batch": {
            "concurrency": 1,
        },
        "diagnostics": {
            "verbose_logging": False,
            "log_to_file": False,
            "logs_dir": "logs",
        },
    }

    def __init__(self, config_file: Optional[Path] = None):
        """
        Initialize configuration manager.

        Args:
            config_file: JSON or YAML settings file; built-in defaults when None
        """
        self.config_file = Path(config_file).resolve() if config_file else None
        self.config: Dict[str, Any] = {}

        self.load()

    def load(self) -> None:
        """Load configuration from file, or use defaults when no file is set."""
        if self.config_file is None:
            self.config = copy.deepcopy(self.DEFAULT_CONFIG)
            return

        if not self.config_file.exists():
            raise FileNotFoundError(f"Config file not found: {self.config_file}")

        with open(self.config_file, "r", encoding="utf-8") as f:
            if self.config_file.suffix.lower() in (".yaml", ".yml"):
                loaded = yaml.safe_load(f) or {}
            else:
                loaded = json.load(f)

        if not isinstance(loaded, dict):
            raise ValueError(f"Config file {self.config_file} must contain a mapping")

        self.config = loaded
        logger.info(f"Loaded configuration from {self.config_file}")

        # Merge with defaults for any missing keys
        self._merge_defaults()

    def save(self, path: Optional[Path] = None) -> None:
        """
        Save current configuration as JSON.

        Args:
            path: Target file; defaults to the file the configuration was loaded from
        """
        target = Path(path) if path else self.config_file
        if target is None:
            raise ValueError("No configuration file to save to")
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8") as f:
            json.dump(self.config, f, indent=2, ensure_ascii=False)
        logger.info(f"Saved configuration to {target}")

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation.

        Args:
            key: Configuration key (e.g., "quadrature.rel_tol")
            default: Default value if key doesn't exist

        Returns:
            Configuration value
        """
        keys = key.split(".")
        value = self.config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def set(self, key: str, value: Any) -> None:
        """
        Set configuration value using dot notation.

        Args:
            key: Configuration key (e.g., "oracle.steps")
            value: Value to set
        """
        keys = key.split(".")
        config = self.config

        # Navigate to the parent dictionary
        for k in keys[:-1]:
            if k not in config or not isinstance(config[k], dict):
                config[k] = {}
            config = config[k]

        config[keys[-1]] = value

    def section(self, name: str) -> Dict[str, Any]:
        """Return a copy of one top-level section (empty dict if absent)."""
        value = self.config.get(name, {})
        return dict(value) if isinstance(value, dict) else {}

    def _merge_defaults(self) -> None:
        """Merge default configuration with loaded config."""
        def merge_dict(base: dict, overlay: dict) -> dict:
            """Recursively merge dictionaries."""
            result = copy.deepcopy(base)
            for key, value in overlay.items():
                if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                    result[key] = merge_dict(result[key], value)
                else:
                    result[key] = value
            return result

        self.config = merge_dict(self.DEFAULT_CONFIG, self.config)

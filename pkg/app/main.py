"""
Mercer Lab - Main Application
Configuration, environment and logging for the integral-operator lab.

This module provides the MercerLab class that loads the YAML configuration,
validates the environment and hands configured defaults to the numerical
modules.
"""

import copy
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml
from dotenv import load_dotenv

from .errors import InvalidArgumentError
from .kernels import KernelSpec, parse_kernel
from .nystrom import DiscreteOperator, discretize_with
from .quadrature import EvalGrid, Interval, QuadratureRule, build_rule, uniform_grid
from .spectral import SpectralDecomposition, eigendecompose

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "config.yaml"

DEFAULTS: Dict[str, Any] = {
    "quadrature": {
        "rule": "gauss-legendre",
        "nodes": 200,
        "newton_tol": 1e-14,
        "newton_max_iter": 100,
        "discretization": "sampled",
    },
    "grid": {"size": 101},
    "spectral": {"ordering": "cyclic", "jacobi_tol": 1e-12, "max_sweeps": 100},
    "kernels": {
        "pathological": {"n_max": 6},
        "legendre": {"terms": 100},
        "slow_trace": {"terms": 100},
    },
    "diagnostics": {
        "jump_threshold": 0.5,
        "growth_per_decade": 0.5,
        "refinement_ratio": 1.1,
        "psd_relative_tol": 1e-10,
        "row_jump_threshold": 0.5,
        "depth": 6,
    },
    "semigroup": {
        "boundary": "dirichlet",
        "times": [0.1, 0.5, 1.0],
        "gaussian_b": 0.125,
        "gaussian_omega": 0.0,
    },
    "output": {"format": "json"},
    "logging": {"level": "INFO", "format": LOG_FORMAT},
}

# Sections whose entries are free-form mappings rather than fixed keys.
OPEN_SECTIONS = ("kernels",)


def merge_config(
    base: Mapping[str, Any], override: Mapping[str, Any], section: str = ""
) -> Dict[str, Any]:
    """
    Merge `override` into a copy of `base`, rejecting keys `base` does not know.

    Raises:
        InvalidArgumentError: On unknown keys or a mapping where a value is expected
    """
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        where = f"{section}.{key}" if section else str(key)
        if key not in merged:
            if section in OPEN_SECTIONS and isinstance(value, Mapping):
                merged[key] = dict(value)
                continue
            raise InvalidArgumentError(f"Unknown configuration key: {where}")
        if isinstance(merged[key], dict):
            if not isinstance(value, Mapping):
                raise InvalidArgumentError(
                    f"Configuration key {where} must be a mapping"
                )
            merged[key] = merge_config(merged[key], value, where)
        else:
            merged[key] = value
    return merged


def setup_logging(
    level: Union[str, int] = "INFO",
    handler: Optional[logging.Handler] = None,
    fmt: str = LOG_FORMAT,
) -> None:
    """
    Configure the root logger.

    Args:
        level: Level name or number
        handler: Handler to install (a stderr StreamHandler if omitted)
        fmt: Record format

    Raises:
        InvalidArgumentError: If the level name is unknown
    """
    if isinstance(level, int):
        numeric = level
    else:
        numeric = logging.getLevelName(str(level).upper())
    if not isinstance(numeric, int):
        raise InvalidArgumentError(f"Unknown log level: {level}")
    logging.basicConfig(
        level=numeric,
        format=fmt,
        handlers=[handler or logging.StreamHandler(sys.stderr)],
        force=True,
    )


class MercerLab:
    """
    Application object for Mercer Lab.

    Holds the merged configuration and builds rules, grids, kernels and
    decompositions with the configured defaults.
    """

    def __init__(self, config_path: Optional[Union[str, Path]] = None) -> None:
        """
        Initialize the lab with configuration.

        Args:
            config_path: YAML file; falls back to MERCERLAB_CONFIG, then the
                packaged config/config.yaml

        Raises:
            InvalidArgumentError: If the configuration or environment is invalid
        """
        # Load environment variables
        load_dotenv()

        self.config_path = self._resolve_config_path(config_path)
        self.run_defaults: Dict[str, Any] = {}
        self.config = self._load_config()
        self.seed = self._validate_environment()

    @staticmethod
    def _resolve_config_path(config_path: Optional[Union[str, Path]]) -> Optional[Path]:
        if config_path is not None:
            return Path(config_path)
        env_path = os.getenv("MERCERLAB_CONFIG")
        if env_path:
            return Path(env_path)
        return DEFAULT_CONFIG_PATH if DEFAULT_CONFIG_PATH.exists() else None

    def _load_config(self) -> Dict[str, Any]:
        """
        Load configuration from YAML and merge it over the built-in defaults.

        Returns:
            Configuration dictionary

        Raises:
            InvalidArgumentError: If the file is missing, not valid YAML or has
                unknown keys
        """
        if self.config_path is None:
            logger.debug("No configuration file found, using built-in defaults")
            return copy.deepcopy(DEFAULTS)
        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                loaded = yaml.safe_load(f) or {}
        except FileNotFoundError as e:
            logger.error(f"Configuration file not found: {self.config_path}")
            raise InvalidArgumentError(
                f"Configuration file not found: {self.config_path}"
            ) from e
        except yaml.YAMLError as e:
            logger.error(f"Invalid YAML in configuration file: {e}")
            raise InvalidArgumentError(
                f"Invalid YAML in configuration file {self.config_path}: {e}"
            ) from e

        if not isinstance(loaded, Mapping):
            raise InvalidArgumentError(
                f"Configuration file {self.config_path} must hold a mapping"
            )
        loaded = dict(loaded)
        # The run section holds per-command option defaults for the CLI.
        self.run_defaults = loaded.pop("run", None) or {}
        config = merge_config(DEFAULTS, loaded)
        logger.info(f"Loaded configuration from {self.config_path}")
        return config

    def _validate_environment(self) -> Optional[int]:
        """
        Validate optional environment variables.

        MERCERLAB_LOG_LEVEL overrides logging.level; MERCERLAB_SEED is reserved
        and only checked to be an integer (nothing in the lab is random).

        Returns:
            The seed, if set

        Raises:
            InvalidArgumentError: If a variable has an invalid value
        """
        level = os.getenv("MERCERLAB_LOG_LEVEL")
        if level:
            if not isinstance(logging.getLevelName(level.upper()), int):
                raise InvalidArgumentError(
                    f"MERCERLAB_LOG_LEVEL is not a log level: {level}"
                )
            self.config["logging"]["level"] = level.upper()

        seed = os.getenv("MERCERLAB_SEED")
        if seed is None or seed == "":
            return None
        try:
            return int(seed)
        except ValueError as e:
            raise InvalidArgumentError(
                f"MERCERLAB_SEED must be an integer, got {seed!r}"
            ) from e

    def setup_logging(
        self,
        handler: Optional[logging.Handler] = None,
        level: Optional[str] = None,
        fmt: Optional[str] = None,
    ) -> None:
        settings = self.config["logging"]
        setup_logging(level or settings["level"], handler, fmt or settings["format"])

    def rule(
        self,
        interval: Interval,
        kind: Optional[str] = None,
        nodes: Optional[int] = None,
    ) -> QuadratureRule:
        settings = self.config["quadrature"]
        return build_rule(
            kind or settings["rule"],
            nodes or settings["nodes"],
            interval,
            newton_tol=settings["newton_tol"],
            newton_max_iter=settings["newton_max_iter"],
        )

    def grid(self, interval: Interval, size: Optional[int] = None) -> EvalGrid:
        return uniform_grid(interval, size or self.config["grid"]["size"])

    def kernel(self, text: str) -> KernelSpec:
        return parse_kernel(text, self.config["kernels"])

    def decompose(self, op: DiscreteOperator) -> SpectralDecomposition:
        settings = self.config["spectral"]
        return eigendecompose(
            op,
            ordering=settings["ordering"],
            tol=settings["jacobi_tol"],
            max_sweeps=settings["max_sweeps"],
        )

    def discretize(
        self, spec: KernelSpec, rule: QuadratureRule, method: Optional[str] = None
    ) -> DiscreteOperator:
        """Discretize with `method` or the configured quadrature.discretization."""
        return discretize_with(
            spec, rule, method or self.config["quadrature"]["discretization"]
        )

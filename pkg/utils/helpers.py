import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd

LOG_FORMAT = "[%(name)s] %(message)s"


class ValidationHelper:
    """Helper class for argument validation"""

    @staticmethod
    def validate_positive(value: float, name: str) -> float:
        """Reject non-finite or non-positive values"""
        if not math.isfinite(value) or value <= 0:
            raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        return float(value)

    @staticmethod
    def validate_weight(alpha: float, name: str = "alpha") -> float:
        """Bergman weights live in (-1, inf)"""
        if not math.isfinite(alpha) or alpha <= -1:
            raise ValueError(f"{name} must be greater than -1, got {alpha!r}")
        return float(alpha)

    @staticmethod
    def validate_radii(radii: Sequence[float], name: str = "radii") -> List[float]:
        """Radii must be positive, finite and strictly increasing"""
        values = [float(r) for r in radii]
        if not values:
            raise ValueError(f"{name} must not be empty")
        for r in values:
            ValidationHelper.validate_positive(r, name)
        for left, right in zip(values, values[1:]):
            if right <= left:
                raise ValueError(f"{name} must be strictly increasing, got {left!r} before {right!r}")
        return values

    @staticmethod
    def validate_point(z: Union[complex, Sequence[float]], name: str = "point") -> complex:
        """Coerce to a finite complex number"""
        if isinstance(z, (tuple, list)):
            if len(z) != 2:
                raise ValueError(f"{name} must have two coordinates, got {z!r}")
            z = complex(float(z[0]), float(z[1]))
        else:
            z = complex(z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise ValueError(f"{name} must have finite coordinates, got {z!r}")
        return z


class DataFormatter:
    """Helper class for result formatting"""

    @staticmethod
    def format_number(value: Optional[float], decimal_places: int = 4) -> str:
        """Format a real that may be +inf or missing"""
        if value is None:
            return "n/a"
        if math.isinf(value):
            return "+inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return f"{value:.{decimal_places}f}"

    @staticmethod
    def format_estimate(mean: float, stderr: float, decimal_places: int = 4) -> str:
        """mean +/- stderr"""
        return f"{DataFormatter.format_number(mean, decimal_places)} +/- {DataFormatter.format_number(stderr, decimal_places)}"

    @staticmethod
    def format_bool(value: bool) -> str:
        """Lowercase booleans as the CLI prints them"""
        return "true" if value else "false"

    @staticmethod
    def format_json_pretty(data: Any) -> str:
        """Format JSON data for display; infinities become strings"""
        return json.dumps(DataFormatter.json_safe(data), indent=2, ensure_ascii=False)

    @staticmethod
    def json_safe(data: Any) -> Any:
        """Replace non-finite floats by their string forms"""
        if isinstance(data, float) and not math.isfinite(data):
            return DataFormatter.format_number(data)
        if isinstance(data, dict):
            return {key: DataFormatter.json_safe(value) for key, value in data.items()}
        if isinstance(data, (list, tuple)):
            return [DataFormatter.json_safe(value) for value in data]
        return data


class ExportHelper:
    """Helper class for result files"""

    @staticmethod
    def to_csv(rows: List[Dict], path: Union[str, Path], columns: Optional[List[str]] = None) -> Path:
        """Write rows as CSV with a stable column order"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(rows, columns=columns)
        frame.to_csv(path, index=False, float_format="%.17g")
        return path

    @staticmethod
    def to_json(data: Any, path: Union[str, Path]) -> Path:
        """Write pretty JSON"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(DataFormatter.format_json_pretty(data) + "\n", encoding="utf-8")
        return path


class LogHelper:
    """Helper class for logging setup"""

    @staticmethod
    def get_logger(component: str) -> logging.Logger:
        """Logger named after the emitting component"""
        return logging.getLogger(component)

    @staticmethod
    def configure(verbose: bool = False) -> None:
        """Console logging in the [Component] message format"""
        logging.basicConfig(
            level=logging.DEBUG if verbose else logging.INFO,
            format=LOG_FORMAT,
            force=True,
        )

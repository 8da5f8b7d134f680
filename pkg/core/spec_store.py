"""
Domain spec files (.dom): JSON documents {label, scale_hint, base_point, obstacles: [{kind, ...}]}
Angles are in radians, lengths in plane units, points are [x, y] pairs.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Union

from pydantic import ValidationError

from core.domain_geometry import DomainSpec
from core.errors import SpecError
from utils.helpers import LogHelper

logger = LogHelper.get_logger("SpecStore")


class SpecStore:
    """Loads, saves and fingerprints domain specs"""

    @staticmethod
    def to_document(spec: DomainSpec) -> Dict[str, Any]:
        """Plain JSON-compatible document"""
        return spec.model_dump(mode="json")

    @staticmethod
    def canonical_json(spec: DomainSpec) -> str:
        """Key-sorted compact JSON; float reprs round-trip exactly"""
        return json.dumps(SpecStore.to_document(spec), sort_keys=True, separators=(",", ":"))

    @staticmethod
    def spec_hash(spec: DomainSpec) -> str:
        """sha256 of the canonical JSON"""
        return hashlib.sha256(SpecStore.canonical_json(spec).encode("utf-8")).hexdigest()

    @staticmethod
    def from_document(document: Dict[str, Any]) -> DomainSpec:
        """Validate a parsed document; the error names the offending obstacle entry"""
        try:
            return DomainSpec.model_validate(document)
        except ValidationError as exc:
            first = exc.errors()[0]
            loc = first.get("loc", ())
            index = None
            if len(loc) >= 2 and loc[0] == "obstacles" and isinstance(loc[1], int):
                index = loc[1]
            field = ".".join(str(part) for part in loc[2:] if not isinstance(part, int))
            message = first.get("msg", str(exc))
            if field:
                message = f"{field}: {message}"
            raise SpecError(message, index) from exc

    @staticmethod
    def load(path: Union[str, Path]) -> DomainSpec:
        """Read a .dom file"""
        path = Path(path)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from exc
        spec = SpecStore.from_document(document)
        logger.debug("loaded %s: %d obstacles", spec.label, len(spec.obstacles))
        return spec

    @staticmethod
    def save(spec: DomainSpec, path: Union[str, Path]) -> Path:
        """Write a .dom file"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(SpecStore.to_document(spec), indent=2) + "\n", encoding="utf-8")
        return path

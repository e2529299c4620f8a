"""Data directory access for the service.

Layout: `runs.log` (required, read once at startup), `params/` with one
immutable weights document per content hash, and `params/current` naming
the ref served by default.  Writes go through one lock; documents are
canonical bytes, so the same fit always lands on the same ref.
"""

import hashlib
import threading
from pathlib import Path
from typing import Mapping

from .. import docio
from ..errors import ConfigError, ValidationError
from ..runs import RunSet, load_run_log
from ..simparams import SimulatorParams, params_doc, params_from_doc

__all__ = ["DataStore"]

REF_LENGTH = 12


class DataStore:
    def __init__(self, data_dir):
        self.root = Path(data_dir)
        runs_path = self.root / "runs.log"
        if not runs_path.is_file():
            raise ConfigError(f"data dir {self.root}: missing runs.log")
        self.run_set: RunSet = load_run_log(runs_path)
        self.params_dir = self.root / "params"
        self.params_dir.mkdir(exist_ok=True)
        self._lock = threading.Lock()

    # -- fitted weights -----------------------------------------------------

    def _params_path(self, ref: str) -> Path:
        if not (ref.isalnum() and len(ref) == REF_LENGTH):
            raise ValidationError(f"bad params ref {ref!r}")
        return self.params_dir / f"{ref}.json"

    def store_params(self, fits: Mapping[int, SimulatorParams]) -> str:
        """Write a weights document, returning its content ref."""
        doc = params_doc(fits)
        data = docio.dumps(doc) + "\n"
        ref = hashlib.sha256(data.encode("utf-8")).hexdigest()[:REF_LENGTH]
        with self._lock:
            path = self._params_path(ref)
            if not path.exists():
                path.write_text(data, encoding="utf-8")
            (self.params_dir / "current").write_text(ref, encoding="utf-8")
        return ref

    def current_ref(self) -> str | None:
        pointer = self.params_dir / "current"
        if not pointer.is_file():
            return None
        ref = pointer.read_text(encoding="utf-8").strip()
        return ref or None

    def params_doc_by_ref(self, ref: str) -> dict | None:
        path = self._params_path(ref)
        if not path.is_file():
            return None
        return docio.loads(path.read_text(encoding="utf-8"))

    def load_fits(self, ref: str) -> dict[int, SimulatorParams] | None:
        doc = self.params_doc_by_ref(ref)
        if doc is None:
            return None
        return params_from_doc(doc)

    def list_refs(self) -> list[str]:
        return sorted(p.stem for p in self.params_dir.glob("*.json"))

"""
Stage Monitor - Track pipeline stage status in the run manifest
"""
import json
import os
import platform
import threading
from datetime import datetime
from enum import Enum

import numpy as np
import pandas as pd
import scipy


class StageStatus(Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"
    SKIPPED = "skipped"


STATUS_ICONS = {
    StageStatus.PENDING.value: "⏳",
    StageStatus.RUNNING.value: "🔄",
    StageStatus.COMPLETED.value: "✅",
    StageStatus.FAILED.value: "💥",
    StageStatus.SKIPPED.value: "⏭️",
}


def package_versions():
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


class StageMonitor:
    """Stage status persisted to manifest.json after every transition - Thread-safe"""

    _lock = threading.Lock()

    def __init__(self, out_dir, manifest_name="manifest.json"):
        self.out_dir = out_dir
        self.manifest_file = os.path.join(out_dir, manifest_name)
        self.manifest = {"stages": {}}
        self._load_manifest()

    def _load_manifest(self):
        """Load manifest from file"""
        if os.path.exists(self.manifest_file):
            try:
                with open(self.manifest_file, 'r', encoding='utf-8') as f:
                    self.manifest = json.load(f)
            except (OSError, json.JSONDecodeError):
                self.manifest = {"stages": {}}
        self.manifest.setdefault("stages", {})

    def _save_manifest(self):
        """Save manifest to file"""
        os.makedirs(self.out_dir, exist_ok=True)
        with open(self.manifest_file, 'w', encoding='utf-8') as f:
            json.dump(self.manifest, f, indent=2, sort_keys=True, default=str)

    def begin_run(self, config_document, inputs_hash, seed):
        """Record what the run was started from"""
        with self._lock:
            self.manifest.update({
                "config": config_document,
                "inputs_hash": inputs_hash,
                "seed": seed,
                "versions": package_versions(),
                "started_at": datetime.now().isoformat(),
            })
            self._save_manifest()

    def start_stage(self, name):
        with self._lock:
            previous = self.manifest["stages"].get(name, {})
            self.manifest["stages"][name] = {
                "status": StageStatus.RUNNING.value,
                "started_at": datetime.now().isoformat(),
                "artifacts": [],
                "error": None,
                "attempts": previous.get("attempts", 0) + 1,
            }
            self._save_manifest()
            print(f"📊 [Monitor] {name} - STARTED")

    def mark_completed(self, name, artifacts=(), seconds=None):
        with self._lock:
            entry = self.manifest["stages"].setdefault(name, {})
            entry["status"] = StageStatus.COMPLETED.value
            entry["artifacts"] = sorted(artifacts)
            entry["seconds"] = None if seconds is None else round(float(seconds), 3)
            entry["completed_at"] = datetime.now().isoformat()
            self._save_manifest()
            print(f"✅ [Monitor] {name} - COMPLETED ({len(entry['artifacts'])} artifacts)")

    def mark_failed(self, name, error):
        with self._lock:
            entry = self.manifest["stages"].setdefault(name, {})
            entry["status"] = StageStatus.FAILED.value
            entry["error"] = error.to_dict() if hasattr(error, "to_dict") else {"message": str(error)[:500]}
            entry["failed_at"] = datetime.now().isoformat()
            self._save_manifest()
            print(f"💥 [Monitor] {name} - FAILED: {str(error)[:100]}")

    def mark_skipped(self, name, reason):
        with self._lock:
            self.manifest["stages"][name] = {"status": StageStatus.SKIPPED.value, "reason": reason,
                                             "artifacts": []}
            self._save_manifest()
            print(f"⏭️ [Monitor] {name} - SKIPPED: {reason}")

    def mark_report(self, artifacts):
        """Report files are tracked outside the stage list"""
        with self._lock:
            self.manifest["report"] = {"artifacts": sorted(artifacts), "written_at": datetime.now().isoformat()}
            self._save_manifest()
            print(f"📋 [Monitor] report - {len(artifacts)} artifacts")

    def stage_status(self, name):
        with self._lock:
            status = self.manifest["stages"].get(name, {}).get("status", StageStatus.PENDING.value)
            return StageStatus(status)

    def get_stages_by_status(self, status: StageStatus):
        with self._lock:
            return [name for name, data in self.manifest["stages"].items()
                    if data.get("status") == status.value]

    def artifacts(self):
        """Every artifact written by a completed stage"""
        with self._lock:
            return sorted(a for data in self.manifest["stages"].values() for a in data.get("artifacts", []))

    def print_status(self):
        for name, data in self.manifest["stages"].items():
            status = data.get("status", StageStatus.PENDING.value)
            print(f"{STATUS_ICONS.get(status, '?')} {name:10} {status}")

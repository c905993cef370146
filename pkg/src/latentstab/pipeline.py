"""End-to-end workflow: standardized data -> ensemble -> stability report."""

from __future__ import annotations

import hashlib
import json
import time
from datetime import datetime, timezone
from pathlib import Path

from .autoenc import NetworkConfig, load_ensemble, save_ensemble, train_ensemble
from .dataspace import TabularDataset
from .report import ReportOptions, RunManifest, build_report


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_pipeline(
    dataset: TabularDataset,
    K,
    epochs,
    base_seed=0,
    options: ReportOptions | None = None,
    workers=1,
    config: NetworkConfig | None = None,
    progress=None,
):
    """Train ``K`` realizations on ``dataset`` and evaluate them.

    Returns ``(ensemble, report)``.
    """
    options = options or ReportOptions()
    if config is None:
        config = NetworkConfig(input_dim=dataset.n_features, epochs=epochs)
    started = _now()
    t0 = time.perf_counter()
    ensemble = train_ensemble(config, dataset, K, base_seed, workers=workers, progress=progress)
    t1 = time.perf_counter()
    manifest = RunManifest(
        dataset_path=dataset.source,
        dataset_hash=dataset.fingerprint(),
        K=K,
        N=dataset.n_samples,
        network_config=config.to_dict(),
        base_seed=int(base_seed),
        seeds=list(ensemble.seeds),
        options=options.to_dict(),
    )
    report = build_report(dataset, ensemble, options, manifest)
    manifest.timestamps = {
        "started": started,
        "finished": _now(),
        "train_seconds": round(t1 - t0, 3),
        "evaluate_seconds": round(time.perf_counter() - t1, 3),
    }
    return ensemble, report


def ensemble_key(dataset: TabularDataset, config: NetworkConfig, K, base_seed):
    doc = json.dumps(
        {"data": dataset.fingerprint(), "config": config.to_dict(), "K": K, "seed": base_seed},
        sort_keys=True,
    )
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def cached_ensemble(dataset, config, K, base_seed, cache_dir, workers=1, progress=None):
    """Train, or reload a previously trained ensemble with the same dataset
    fingerprint, network config, K and seeds."""
    path = Path(cache_dir) / ensemble_key(dataset, config, K, base_seed)
    if (path / "manifest.json").exists():
        return load_ensemble(path)
    ens = train_ensemble(config, dataset, K, base_seed, workers=workers, progress=progress)
    save_ensemble(ens, path)
    return ens

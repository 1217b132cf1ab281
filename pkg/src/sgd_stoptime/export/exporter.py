# Copyright 2025 The sgd_stoptime Authors

import json
from pathlib import Path

import pandas as pd

import sgd_stoptime.logger as sglog
from sgd_stoptime.diagnostics.report import _plain
from sgd_stoptime.types import Verdict


# full round-trip precision for floats in CSV tables
CSV_FLOAT_FORMAT = "%.17g"


class AbstractArtifactExporter:
    '''
    Abstract exporter class

    Defines required functions:

    export()
    * take data destined for the target, may just buffer it

    flush()
    * write the accumulated buffer to the target
    '''

    def __init__(self, target_uri) -> None:
        self.target_uri = Path(target_uri)

    def export(self, _data):
        raise NotImplementedError("Class %s doesn't implement export()" % (self.__class__.__name__))

    def flush(self) -> Path:
        raise NotImplementedError("Class %s doesn't implement flush()" % (self.__class__.__name__))

    def _prepare_target(self) -> None:
        self.target_uri.parent.mkdir(parents=True, exist_ok=True)


class JsonArtifactExporter(AbstractArtifactExporter):
    '''
    Merges exported dicts and dumps them with sorted keys on flush(). Output is deterministic:
    no timestamps, non-finite floats as strings.
    '''
    def __init__(self, target_uri) -> None:
        super().__init__(target_uri)
        self.data: dict = {}

    def export(self, data: dict):
        self.data.update(data)

    def get_data(self) -> str:
        return json.dumps(_plain(self.data), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def flush(self) -> Path:
        self._prepare_target()
        self.target_uri.write_text(self.get_data())
        sglog.log(sglog.DEBUG, "Wrote", self.target_uri)
        return self.target_uri


class CsvTableExporter(AbstractArtifactExporter):
    '''
    Concatenates exported tables and writes one CSV with full float precision.
    '''
    def __init__(self, target_uri) -> None:
        super().__init__(target_uri)
        self.frames: list[pd.DataFrame] = []

    def export(self, data: pd.DataFrame):
        self.frames.append(data)

    def flush(self) -> Path:
        self._prepare_target()
        table = pd.concat(self.frames, ignore_index=True) if self.frames else pd.DataFrame()
        table.to_csv(self.target_uri, index=False, float_format=CSV_FLOAT_FORMAT)
        sglog.log(sglog.DEBUG, "Wrote", self.target_uri)
        return self.target_uri


def export_ensemble(result, config, out_dir, version: str) -> list[Path]:
    '''
    Write the artifacts of one ensemble run into out_dir:
    ensemble.json, checkpoints.csv, diagnostics.json, manifest.json and, when enabled,
    trajectories/seed_<k>.csv.
    '''
    out = Path(out_dir)
    written = []

    ensemble = JsonArtifactExporter(out / "ensemble.json")
    ensemble.export(result.stats.to_dict())
    ensemble.export({"final_values": {str(s): v for s, v in sorted(result.final_values.items())},
                     "diverged_fraction": result.diverged_fraction})
    written.append(ensemble.flush())

    checkpoints = CsvTableExporter(out / "checkpoints.csv")
    checkpoints.export(result.stats.checkpoint_frame())
    written.append(checkpoints.flush())

    classification = result.classification
    diagnostics = JsonArtifactExporter(out / "diagnostics.json")
    diagnostics.export({
        "schedule": {"robbins_monro": str(classification.robbins_monro),
                     "relaxed": str(classification.relaxed),
                     "tests": classification.tests,
                     "guarantee": "relaxed" if classification.relaxed == Verdict.YES else "no guarantee"},
        "ensemble": [r.to_dict() for r in result.results],
        "per_seed": [result.reports[s].to_dict() for s in sorted(result.reports)],
        "failures": {str(s): msg for s, msg in sorted(result.failures.items())},
        "passed": result.passed(config.max_divergence_fraction),
    })
    written.append(diagnostics.flush())

    for seed, trajectory in sorted(result.trajectories.items()):
        table = CsvTableExporter(out / "trajectories" / f"seed_{seed}.csv")
        table.export(trajectory.to_frame())
        written.append(table.flush())

    manifest = JsonArtifactExporter(out / "manifest.json")
    manifest.export({
        "config_hash": config.config_hash(),
        "version": version,
        "seeds": result.seeds,
        "artifacts": sorted(str(p.relative_to(out)) for p in written),
    })
    written.append(manifest.flush())
    return written

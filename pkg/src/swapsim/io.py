"""File formats: binary weight/matrix containers, CSV tables, YAML documents.

Packed ternary weights use a small binary container: an 8-byte header
(magic, version, reserved) followed by little-endian uint32 rows/cols, a
group-size byte, and the packed group indices (one byte per index while
3^G fits a byte, two otherwise). Float matrices share the container style
for test-vector exchange. Everything else is plain CSV or YAML.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np
import yaml

from .dse import DesignPoint, DseResult
from .perf import BaselineConfig, Measurement, PhaseLatencyModel
from .resources import RESOURCE_CLASSES, PortMap, ResourceVector, Role
from .simulate import COMPARE_COLUMNS, SwapTimeline
from .tlmm import PackedWeights, TernaryMatrix

WEIGHTS_MAGIC = b"TWPK"
MATRIX_MAGIC = b"TMAT"
_HEADER = struct.Struct("<4sBxxxIIB")
_MAT_HEADER = struct.Struct("<4sBxxxII")


class FormatError(ValueError):
    """A file does not match the expected container layout."""


def save_packed_weights(path: str | Path, p: PackedWeights) -> None:
    dtype = "<u1" if 3**p.group_size <= 256 else "<u2"
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(WEIGHTS_MAGIC, 1, p.rows, p.cols, p.group_size))
        fh.write(np.ascontiguousarray(p.packed, dtype=dtype).tobytes())


def load_packed_weights(path: str | Path) -> PackedWeights:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, rows, cols, group_size = _HEADER.unpack_from(raw)
    if magic != WEIGHTS_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != 1:
        raise FormatError(f"{path}: unsupported version {version}")
    dtype = "<u1" if 3**group_size <= 256 else "<u2"
    n_groups = -(-cols // group_size)
    body = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size)
    if body.size != rows * n_groups:
        raise FormatError(f"{path}: expected {rows * n_groups} indices, found {body.size}")
    return PackedWeights(rows, cols, group_size, body.reshape(rows, n_groups).astype(np.int32))


def save_matrix(path: str | Path, array: np.ndarray) -> None:
    a = np.ascontiguousarray(array, dtype="<f4")
    if a.ndim != 2:
        raise ValueError("matrix container stores 2-D arrays")
    with open(path, "wb") as fh:
        fh.write(_MAT_HEADER.pack(MATRIX_MAGIC, 1, a.shape[0], a.shape[1]))
        fh.write(a.tobytes())


def load_matrix(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _MAT_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, rows, cols = _MAT_HEADER.unpack_from(raw)
    if magic != MATRIX_MAGIC or version != 1:
        raise FormatError(f"{path}: bad magic/version")
    body = np.frombuffer(raw, dtype="<f4", offset=_MAT_HEADER.size)
    if body.size != rows * cols:
        raise FormatError(f"{path}: expected {rows * cols} values, found {body.size}")
    return body.reshape(rows, cols).astype(np.float32)


def save_ternary_text(path: str | Path, w: TernaryMatrix) -> None:
    with open(path, "w") as fh:
        for row in w.values:
            fh.write(" ".join(str(int(x)) for x in row) + "\n")


def load_ternary_text(path: str | Path) -> TernaryMatrix:
    rows = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([int(tok) for tok in line.split()])
        except ValueError as exc:
            raise FormatError(f"{path}:{line_no}: {exc}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: expected a nonempty rectangular matrix")
    return TernaryMatrix.from_array(np.array(rows))


# -- CSV tables --------------------------------------------------------------


def _fmt(value: float) -> str:
    # repr round-trips exactly and is deterministic for identical inputs
    return repr(float(value))


def write_csv(path: str | Path, columns: tuple[str, ...], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) if isinstance(row[c], float) else row[c] for c in columns])


TIMELINE_COLUMNS = ("event", "index", "start_s", "end_s")


def write_timeline_csv(path: str | Path, timeline: SwapTimeline) -> None:
    rows = [
        {"event": e.kind, "index": e.index, "start_s": e.start, "end_s": e.end}
        for e in timeline.events
    ]
    write_csv(path, TIMELINE_COLUMNS, rows)


def write_compare_csv(path: str | Path, rows: list[dict[str, float]]) -> None:
    write_csv(path, COMPARE_COLUMNS, rows)


DSE_POINT_COLUMNS = (
    ("proj_parallelism", "pe_count_pre", "pe_count_dec")
    + tuple(f"proj_{c}" for c in RESOURCE_CLASSES)
    + tuple(f"att_pre_{c}" for c in RESOURCE_CLASSES)
    + tuple(f"att_dec_{c}" for c in RESOURCE_CLASSES)
    + ("t_pre_s", "t_dec_long_s", "t_dec_short_s", "objective_s", "feasibility")
)


def write_dse_csv(path: str | Path, result: DseResult) -> None:
    rows = []
    for p in result.evaluated:
        d = p.design
        row: dict = {
            "proj_parallelism": d.proj_parallelism,
            "pe_count_pre": d.pe_count_pre,
            "pe_count_dec": d.pe_count_dec,
            "t_pre_s": p.t_pre,
            "t_dec_long_s": p.t_dec_long,
            "t_dec_short_s": p.t_dec_short,
            "objective_s": p.objective,
            "feasibility": p.feasibility,
        }
        for cls in RESOURCE_CLASSES:
            row[f"proj_{cls}"] = getattr(d.r_proj, cls)
            row[f"att_pre_{cls}"] = getattr(d.r_att_pre, cls)
            row[f"att_dec_{cls}"] = getattr(d.r_att_dec, cls)
        rows.append(row)
    write_csv(path, DSE_POINT_COLUMNS, rows)


MEASUREMENT_COLUMNS = ("phase", "tokens") + RESOURCE_CLASSES + ("seconds",)


def write_measurements_csv(path: str | Path, measurements: list[Measurement]) -> None:
    rows = []
    for m in measurements:
        row: dict = {"phase": m.phase, "tokens": m.tokens, "seconds": m.seconds}
        row.update({c: getattr(m.resources, c) for c in RESOURCE_CLASSES})
        rows.append(row)
    write_csv(path, MEASUREMENT_COLUMNS, rows)


def read_measurements_csv(path: str | Path) -> list[Measurement]:
    measurements = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(MEASUREMENT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise FormatError(f"{path}: missing columns {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                resources = ResourceVector(**{c: float(row[c]) for c in RESOURCE_CLASSES})
                measurements.append(
                    Measurement(row["phase"], int(row["tokens"]), resources, float(row["seconds"]))
                )
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{line_no}: {exc}") from exc
    return measurements


# -- YAML documents ----------------------------------------------------------


def _resources_doc(r: ResourceVector) -> dict:
    return {c: getattr(r, c) for c in RESOURCE_CLASSES}


def _ports_doc(p: PortMap) -> dict:
    return {"roles": [r.value for r in p.roles], "per_port_bw": p.per_port_bw}


def _ports_from_doc(doc: dict) -> PortMap:
    return PortMap(tuple(Role(r) for r in doc["roles"]), float(doc["per_port_bw"]))


def _dump_yaml(path: str | Path, doc: dict) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True, default_flow_style=False)


def save_model(path: str | Path, model: PhaseLatencyModel) -> None:
    doc = {
        "coefficients": model.coefficients(),
        "baseline": {
            "r_proj": _resources_doc(model.baseline.r_proj),
            "r_att_pre": _resources_doc(model.baseline.r_att_pre),
            "r_att_dec": _resources_doc(model.baseline.r_att_dec),
            "ports_pre": _ports_doc(model.baseline.ports_pre),
            "ports_dec": _ports_doc(model.baseline.ports_dec),
        },
    }
    _dump_yaml(path, doc)


def load_model(path: str | Path) -> PhaseLatencyModel:
    doc = yaml.safe_load(Path(path).read_text())
    try:
        base = doc["baseline"]
        baseline = BaselineConfig(
            r_proj=ResourceVector(**base["r_proj"]),
            r_att_pre=ResourceVector(**base["r_att_pre"]),
            r_att_dec=ResourceVector(**base["r_att_dec"]),
            ports_pre=_ports_from_doc(base["ports_pre"]),
            ports_dec=_ports_from_doc(base["ports_dec"]),
        )
        return PhaseLatencyModel(baseline=baseline, **doc["coefficients"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed model document ({exc})") from exc


def save_design(path: str | Path, d: DesignPoint) -> None:
    doc = {
        "r_proj": _resources_doc(d.r_proj),
        "r_att_pre": _resources_doc(d.r_att_pre),
        "r_att_dec": _resources_doc(d.r_att_dec),
        "port_map_pre": _ports_doc(d.port_map_pre),
        "port_map_dec": _ports_doc(d.port_map_dec),
        "pe_count_pre": d.pe_count_pre,
        "pe_count_dec": d.pe_count_dec,
        "proj_parallelism": d.proj_parallelism,
    }
    _dump_yaml(path, doc)


def load_design(path: str | Path) -> DesignPoint:
    doc = yaml.safe_load(Path(path).read_text())
    try:
        return DesignPoint(
            r_proj=ResourceVector(**doc["r_proj"]),
            r_att_pre=ResourceVector(**doc["r_att_pre"]),
            r_att_dec=ResourceVector(**doc["r_att_dec"]),
            port_map_pre=_ports_from_doc(doc["port_map_pre"]),
            port_map_dec=_ports_from_doc(doc["port_map_dec"]),
            pe_count_pre=int(doc["pe_count_pre"]),
            pe_count_dec=int(doc["pe_count_dec"]),
            proj_parallelism=int(doc["proj_parallelism"]),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed design document ({exc})") from exc

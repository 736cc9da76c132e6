"""Dataset/group hierarchy extraction and the JSON schema-manifest format.

Two ingestion routes produce the same immutable ``SchemaIndex``: reading
an HDF5 container directly, or loading a JSON manifest that describes one
(handy for fixtures and for formats we never read natively). ``dump_manifest``
and ``load_manifest`` round-trip exactly.
"""

from __future__ import annotations

import hashlib
import json
import unicodedata
from dataclasses import dataclass
from pathlib import Path

import h5py
import numpy as np

from .errors import CorruptFile, InvariantViolation, ManifestError, NotAnHdf5Container

PREVIEW_LIMIT = 120


@dataclass(frozen=True)
class DatasetEntry:
    path: str
    shape: tuple[int, ...]
    dtype: str
    attributes: tuple[tuple[str, str], ...]  # (name, preview)

    @property
    def leaf(self) -> str:
        return self.path.rsplit("/", 1)[-1]


@dataclass(frozen=True)
class SchemaIndex:
    datasets: tuple[DatasetEntry, ...]
    groups: tuple[str, ...]
    source_id: str

    def dataset_paths(self) -> list[str]:
        return [d.path for d in self.datasets]


def _check_path(path: str, where: str) -> str:
    if not path.startswith("/"):
        raise InvariantViolation(f"{where}: path must be absolute: {path!r}")
    if path != "/" and any(not c for c in path[1:].split("/")):
        raise InvariantViolation(f"{where}: path has empty components: {path!r}")
    return path


def _ancestors(path: str) -> list[str]:
    parts = path.strip("/").split("/")
    out = ["/"]
    for i in range(1, len(parts)):
        out.append("/" + "/".join(parts[:i]))
    return out


def _validate(datasets: list[DatasetEntry], groups: list[str], where: str) -> None:
    seen: set[str] = set()
    for d in datasets:
        _check_path(d.path, where)
        if d.path == "/":
            raise InvariantViolation(f"{where}: dataset path cannot be the root")
        if d.path in seen:
            raise InvariantViolation(f"{where}: duplicate dataset path {d.path!r}")
        seen.add(d.path)
        names = [n for n, _ in d.attributes]
        if len(names) != len(set(names)):
            raise InvariantViolation(
                f"{where}: duplicate attribute name on {d.path!r}"
            )
    group_set = set(groups)
    for d in datasets:
        for anc in _ancestors(d.path):
            if anc not in group_set:
                raise InvariantViolation(
                    f"{where}: parent group {anc!r} of {d.path!r} missing"
                )


def _structure_fingerprint(datasets: list[DatasetEntry], groups: list[str]) -> str:
    doc = {
        "groups": list(groups),
        "datasets": [
            {
                "path": d.path,
                "shape": list(d.shape),
                "dtype": d.dtype,
                "attributes": [{"name": n, "preview": p} for n, p in d.attributes],
            }
            for d in datasets
        ],
    }
    digest = hashlib.sha256(
        json.dumps(doc, sort_keys=True, ensure_ascii=False).encode("utf-8")
    ).hexdigest()
    return f"sha256:{digest}"


def _preview(value) -> str:
    """Render an attribute value as a short string, never raw binary."""
    if isinstance(value, np.ndarray) and value.ndim > 0:
        return f"array[{'x'.join(str(n) for n in value.shape)}]"
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bytes):
        value = value.decode("utf-8", errors="replace")
    text = str(value)
    return text[:PREVIEW_LIMIT]


def extract_schema(data_file: str | Path) -> SchemaIndex:
    """Walk an HDF5 file and index every group and dataset in it."""
    path = Path(data_file)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if not h5py.is_hdf5(str(path)):
        raise NotAnHdf5Container(f"not an HDF5 container: {path}")

    groups: list[str] = ["/"]
    datasets: list[DatasetEntry] = []
    try:
        with h5py.File(path, "r") as f:

            def visit(name: str, obj) -> None:
                full = unicodedata.normalize("NFC", "/" + name)
                if isinstance(obj, h5py.Group):
                    groups.append(full)
                elif isinstance(obj, h5py.Dataset):
                    attrs = tuple(
                        (str(k), _preview(obj.attrs[k])) for k in obj.attrs.keys()
                    )
                    datasets.append(
                        DatasetEntry(
                            path=full,
                            shape=tuple(int(n) for n in obj.shape),
                            dtype=str(obj.dtype),
                            attributes=attrs,
                        )
                    )

            f.visititems(visit)
    except (OSError, RuntimeError) as exc:
        raise CorruptFile(f"failed to walk {path}: {exc}") from exc

    datasets.sort(key=lambda d: d.path)
    groups = sorted(set(groups))
    _validate(datasets, groups, str(path))
    return SchemaIndex(
        datasets=tuple(datasets),
        groups=tuple(groups),
        source_id=_structure_fingerprint(datasets, groups),
    )


def load_manifest(manifest_doc: str) -> SchemaIndex:
    """Parse a JSON schema manifest into a validated ``SchemaIndex``."""
    try:
        doc = json.loads(manifest_doc)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ManifestError("top level must be an object")

    source_id = doc.get("source_id", "")
    if not isinstance(source_id, str):
        raise ManifestError("source_id: expected string")
    raw_groups = doc.get("groups", [])
    if not isinstance(raw_groups, list) or any(
        not isinstance(g, str) for g in raw_groups
    ):
        raise ManifestError("groups: expected list of strings")
    raw_datasets = doc.get("datasets", [])
    if not isinstance(raw_datasets, list):
        raise ManifestError("datasets: expected list")

    datasets: list[DatasetEntry] = []
    for i, item in enumerate(raw_datasets):
        where = f"datasets[{i}]"
        if not isinstance(item, dict):
            raise ManifestError(f"{where}: expected object")
        path = item.get("path")
        if not isinstance(path, str) or not path:
            raise ManifestError(f"{where}.path: expected nonempty string")
        shape = item.get("shape", [])
        if not isinstance(shape, list) or any(
            not isinstance(n, int) or isinstance(n, bool) or n < 0 for n in shape
        ):
            raise ManifestError(f"{where}.shape: expected list of ints >= 0")
        dtype = item.get("dtype", "")
        if not isinstance(dtype, str):
            raise ManifestError(f"{where}.dtype: expected string")
        attrs: list[tuple[str, str]] = []
        for j, attr in enumerate(item.get("attributes", [])):
            if (
                not isinstance(attr, dict)
                or not isinstance(attr.get("name"), str)
                or not isinstance(attr.get("preview", ""), str)
            ):
                raise ManifestError(
                    f"{where}.attributes[{j}]: expected {{name, preview}}"
                )
            attrs.append(
                (attr["name"], attr.get("preview", "")[:PREVIEW_LIMIT])
            )
        datasets.append(
            DatasetEntry(
                path=unicodedata.normalize("NFC", path),
                shape=tuple(shape),
                dtype=dtype,
                attributes=tuple(attrs),
            )
        )

    groups = {unicodedata.normalize("NFC", g) for g in raw_groups}
    groups.add("/")
    for g in groups:
        _check_path(g, "groups")
    for d in datasets:
        groups.update(_ancestors(d.path))

    datasets.sort(key=lambda d: d.path)
    ordered_groups = sorted(groups)
    _validate(datasets, ordered_groups, "manifest")
    return SchemaIndex(
        datasets=tuple(datasets),
        groups=tuple(ordered_groups),
        source_id=source_id
        or _structure_fingerprint(datasets, ordered_groups),
    )


def dump_manifest(index: SchemaIndex) -> str:
    """Serialize an index to manifest JSON; inverse of ``load_manifest``."""
    doc = {
        "source_id": index.source_id,
        "groups": list(index.groups),
        "datasets": [
            {
                "path": d.path,
                "shape": list(d.shape),
                "dtype": d.dtype,
                "attributes": [{"name": n, "preview": p} for n, p in d.attributes],
            }
            for d in index.datasets
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False)


def load_schema(path: str | Path) -> SchemaIndex:
    """Ingest either route by sniffing: JSON manifest or HDF5 container."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    if h5py.is_hdf5(str(p)):
        return extract_schema(p)
    return load_manifest(p.read_text(encoding="utf-8"))

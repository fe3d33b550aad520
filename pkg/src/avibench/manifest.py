"""Dataset manifests: the ``itemid,hasbird,site,path`` CSV tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

HEADER = ("itemid", "hasbird", "site", "path")
_LABEL_TOKENS = {"1": 1, "0": 0, "?": None}


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestItem:
    item_id: str
    label: int | None  # 1 positive, 0 negative, None unknown
    site: str | None = None
    path: str = ""


@dataclass
class DatasetManifest:
    items: list[ManifestItem]
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        seen = set()
        for it in self.items:
            if it.item_id in seen:
                raise ManifestError(f"duplicate id {it.item_id!r}")
            seen.add(it.item_id)
            if it.label not in (0, 1, None):
                raise ManifestError(f"{it.item_id}: label must be 0, 1 or None")
            if it.path:
                p = PurePosixPath(it.path)
                if p.is_absolute() or ".." in p.parts:
                    raise ManifestError(f"{it.item_id}: path {it.path!r} escapes the dataset root")

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def ids(self) -> list[str]:
        return [it.item_id for it in self.items]

    def labels(self) -> dict[str, int | None]:
        return {it.item_id: it.label for it in self.items}

    def sites(self) -> dict[str, str | None]:
        return {it.item_id: it.site for it in self.items}

    @property
    def is_labelled(self) -> bool:
        return all(it.label is not None for it in self.items)

    def resolve(self, item: ManifestItem) -> Path:
        base = self.root if self.root is not None else Path(".")
        return base / item.path

    def subset(self, ids) -> "DatasetManifest":
        wanted = set(ids)
        return DatasetManifest([it for it in self.items if it.item_id in wanted], self.root)


def _label_token(label):
    return "?" if label is None else str(label)


def parse_manifest(text: str, root=None) -> DatasetManifest:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or tuple(c.strip() for c in rows[0]) != HEADER:
        raise ManifestError(f"manifest header must be {','.join(HEADER)}")
    items = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ManifestError(f"line {lineno}: expected 4 fields, got {len(row)}")
        item_id, tok, site, path = (c.strip() for c in row)
        if tok not in _LABEL_TOKENS:
            raise ManifestError(f"line {lineno}: malformed label token {tok!r}")
        items.append(ManifestItem(item_id, _LABEL_TOKENS[tok], site or None, path))
    return DatasetManifest(items, Path(root) if root is not None else None)


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), root=path.parent)


def format_manifest(manifest: DatasetManifest) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for it in manifest.items:
        w.writerow([it.item_id, _label_token(it.label), it.site or "", it.path])
    return buf.getvalue()


def write_manifest(manifest: DatasetManifest, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(format_manifest(manifest))
    return path

"""Multi-label datasets: ARFF + label XML (MULAN layout), a native JSON-lines
format, summary statistics, label co-occurrence counts and CV folds.

Native format: the first line is a schema record
``{"format":"mlcover-native","version":1,"relation":R,"attributes":[...],"labels":[...]}``
where each attribute is ``{"name":N,"kind":"numeric"}`` or
``{"name":N,"kind":"nominal","values":[...]}``. Every following line is an
instance record ``{"x":[...],"y":[...]}``: ``x`` holds one value per
attribute (float, nominal string, or null for missing) and ``y`` the sorted
0-based indices of the relevant labels. Records are compact JSON, one per
LF-terminated line.
"""
from __future__ import annotations

import itertools
import json
import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, ValidationError

MISSING = None
NATIVE_FORMAT = "mlcover-native"


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: str  # "numeric" or "nominal"
    values: tuple[str, ...] = ()

    @property
    def is_nominal(self) -> bool:
        return self.kind == "nominal"


@dataclass(frozen=True, eq=False)
class MultiLabelDataset:
    """Immutable dataset; label subsets are sorted tuples (possibly empty)."""

    attributes: tuple[Attribute, ...]
    labels: tuple[str, ...]
    features: tuple[tuple, ...]
    label_sets: tuple[tuple[int, ...], ...]
    relation: str = "dataset"

    def __post_init__(self):
        if len(self.features) != len(self.label_sets):
            raise ValidationError("features and label subsets differ in length")
        if not self.features:
            raise ValidationError("no instances")
        if len(self.labels) < 2:
            raise ValidationError("a multi-label dataset needs at least 2 labels")

    @property
    def m(self) -> int:
        return len(self.labels)

    def __len__(self):
        return len(self.features)

    def __eq__(self, other):
        if not isinstance(other, MultiLabelDataset):
            return NotImplemented
        return (self.attributes, self.labels, self.label_sets, self.relation) == \
            (other.attributes, other.labels, other.label_sets, other.relation) and \
            _same_rows(self.features, other.features)

    __hash__ = None

    @cached_property
    def Y(self) -> np.ndarray:
        """Boolean label indicator matrix, shape (n, m)."""
        out = np.zeros((len(self), self.m), dtype=bool)
        for i, ys in enumerate(self.label_sets):
            out[i, list(ys)] = True
        return out

    @cached_property
    def columns(self) -> list[np.ndarray]:
        """Per-attribute arrays: floats (nan = missing) or nominal codes (-1 = missing)."""
        cols = []
        for a, attr in enumerate(self.attributes):
            if attr.is_nominal:
                index = {v: i for i, v in enumerate(attr.values)}
                cols.append(np.array([-1 if row[a] is None else index[row[a]] for row in self.features],
                                     dtype=np.int64))
            else:
                cols.append(np.array([math.nan if row[a] is None else row[a] for row in self.features],
                                     dtype=float))
        return cols

    def subset(self, indices: Sequence[int]) -> "MultiLabelDataset":
        idx = [int(i) for i in indices]
        out = MultiLabelDataset(self.attributes, self.labels, tuple(self.features[i] for i in idx),
                                tuple(self.label_sets[i] for i in idx), self.relation)
        if "columns" in self.__dict__:
            object.__setattr__(out, "columns", [c[idx] for c in self.columns])
        return out


def _same_rows(a, b) -> bool:
    if len(a) != len(b):
        return False
    for ra, rb in zip(a, b):
        for x, y in zip(ra, rb):
            if x != y and not (isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y)):
                return False
    return True


def validate_dataset(d: MultiLabelDataset) -> MultiLabelDataset:
    for i, (row, ys) in enumerate(zip(d.features, d.label_sets)):
        if len(row) != len(d.attributes):
            raise ValidationError(f"instance {i} has {len(row)} values for {len(d.attributes)} attributes")
        for attr, v in zip(d.attributes, row):
            if v is None:
                continue
            if attr.is_nominal and v not in attr.values:
                raise ValidationError(f"instance {i}: {v!r} not declared for attribute {attr.name!r}")
            if not attr.is_nominal and not isinstance(v, float):
                raise ValidationError(f"instance {i}: non-numeric value {v!r} for {attr.name!r}")
        if list(ys) != sorted(set(ys)) or any(not 0 <= y < d.m for y in ys):
            raise ValidationError(f"instance {i}: label indices {ys} invalid for m={d.m}")
    return d


# ---------------------------------------------------------------- ARFF


def _split_fields(text: str, line: int) -> list[tuple[str, bool]]:
    """Split on commas outside quotes; returns (field, was_quoted) pairs."""
    fields = []
    buf: list[str] = []
    quote = None
    quoted = False
    i = 0
    while i < len(text):
        c = text[i]
        if quote:
            if c == "\\" and i + 1 < len(text):
                buf.append(text[i + 1])
                i += 2
                continue
            if c == quote:
                quote = None
            else:
                buf.append(c)
        elif c in "'\"":
            quote, quoted = c, True
        elif c == ",":
            fields.append(("".join(buf).strip() if not quoted else "".join(buf), quoted))
            buf, quoted = [], False
        else:
            buf.append(c)
        i += 1
    if quote:
        raise ParseError("unterminated quote", line)
    fields.append(("".join(buf).strip() if not quoted else "".join(buf), quoted))
    return fields


def _strip_comment(text: str) -> str:
    quote = None
    for i, c in enumerate(text):
        if quote:
            if c == quote:
                quote = None
        elif c in "'\"":
            quote = c
        elif c == "%":
            return text[:i]
    return text


def _read_name(rest: str, line: int) -> tuple[str, str]:
    rest = rest.lstrip()
    if rest[:1] in ("'", '"'):
        q = rest[0]
        end = rest.find(q, 1)
        if end < 0:
            raise ParseError("unterminated quoted name", line)
        return rest[1:end], rest[end + 1:].strip()
    parts = rest.split(None, 1)
    if len(parts) < 2:
        raise ParseError("attribute declaration needs a name and a type", line)
    return parts[0], parts[1].strip()


def _parse_attribute(rest: str, line: int) -> Attribute:
    name, kind = _read_name(rest, line)
    if kind.startswith("{"):
        if not kind.endswith("}"):
            raise ParseError(f"unterminated nominal value list for {name!r}", line)
        values = tuple(v for v, _ in _split_fields(kind[1:-1], line))
        return Attribute(name, "nominal", values)
    low = kind.lower()
    if low in ("numeric", "real", "integer"):
        return Attribute(name, "numeric")
    raise ParseError(f"unsupported attribute type {kind!r} for {name!r}", line)


def read_label_names(label_xml: bytes | str) -> list[str]:
    """Label names from a MULAN-style XML file, in document order."""
    root = ET.fromstring(label_xml)
    names = [el.get("name") for el in root.iter() if el.tag.split("}")[-1] == "label"]
    if not names or any(n is None for n in names):
        raise ValidationError("label XML must contain <label name=...> elements")
    return names


def parse_arff(arff_text: bytes | str, label_names: Sequence[str] | None = None,
               last: int | None = None) -> MultiLabelDataset:
    """Parse an ARFF file; labels are the attributes named in ``label_names``
    or, failing that, the ``last`` N attributes."""
    if isinstance(arff_text, bytes):
        arff_text = arff_text.decode("utf-8")
    relation = "dataset"
    attributes: list[Attribute] = []
    rows: list[tuple[int, list]] = []
    in_data = False
    for lineno, raw in enumerate(arff_text.splitlines(), start=1):
        text = _strip_comment(raw).strip()
        if not text:
            continue
        if not in_data:
            low = text.lower()
            if low.startswith("@relation"):
                relation = _read_name(text[len("@relation"):] + " x", lineno)[0]
            elif low.startswith("@attribute"):
                attributes.append(_parse_attribute(text[len("@attribute"):], lineno))
            elif low.startswith("@data"):
                in_data = True
            else:
                raise ParseError(f"unexpected header line {text!r}", lineno)
            continue
        rows.append((lineno, _parse_row(text, attributes, lineno)))
    if not in_data:
        raise ParseError("no @data section")
    if label_names is None:
        if last is None:
            raise ValidationError("labels must come from an XML file or a last:N rule")
        if not 1 <= last < len(attributes):
            raise ValidationError(f"last:{last} is out of range for {len(attributes)} attributes")
        label_names = [a.name for a in attributes[-last:]]
    by_name = {a.name: i for i, a in enumerate(attributes)}
    label_idx = []
    for name in label_names:
        if name not in by_name:
            raise ValidationError(f"label {name!r} is not an attribute of the ARFF file")
        attr = attributes[by_name[name]]
        if not attr.is_nominal or set(attr.values) != {"0", "1"}:
            raise ValidationError(f"label attribute {name!r} must be binary {{0,1}}")
        label_idx.append(by_name[name])
    label_pos = set(label_idx)
    feat_idx = [i for i in range(len(attributes)) if i not in label_pos]
    features, label_sets = [], []
    for lineno, values in rows:
        ys = []
        for j, a in enumerate(label_idx):
            v = values[a]
            if v not in ("0", "1"):
                raise ParseError(f"label {attributes[a].name!r} has non-binary value {v!r}", lineno)
            if v == "1":
                ys.append(j)
        features.append(tuple(values[i] for i in feat_idx))
        label_sets.append(tuple(ys))
    if not features:
        raise ValidationError("no instances")
    return MultiLabelDataset(tuple(attributes[i] for i in feat_idx), tuple(label_names), tuple(features),
                             tuple(label_sets), relation)


def _convert(attr: Attribute, token: str, quoted: bool, lineno: int):
    if token == "?" and not quoted:
        return MISSING
    if attr.is_nominal:
        if token not in attr.values:
            raise ParseError(f"value {token!r} not declared for attribute {attr.name!r}", lineno)
        return token
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"non-numeric value {token!r} for attribute {attr.name!r}", lineno) from None


def _parse_row(text: str, attributes: list[Attribute], lineno: int) -> list:
    if text.startswith("{"):
        if not text.endswith("}"):
            raise ParseError("unterminated sparse row", lineno)
        values = [0.0 if not a.is_nominal else a.values[0] for a in attributes]
        body = text[1:-1].strip()
        if not body:
            return values
        for item, _ in _split_fields(body, lineno):
            parts = item.split(None, 1)
            if len(parts) != 2 or not parts[0].isdigit():
                raise ParseError(f"bad sparse entry {item!r}", lineno)
            idx = int(parts[0])
            if idx >= len(attributes):
                raise ParseError(f"sparse index {idx} out of range ({len(attributes)} attributes)", lineno)
            token = parts[1].strip()
            quoted = token[:1] in ("'", '"')
            if quoted:
                token = token[1:-1]
            values[idx] = _convert(attributes[idx], token, quoted, lineno)
        return values
    fields = _split_fields(text, lineno)
    if len(fields) != len(attributes):
        raise ParseError(f"row has {len(fields)} values, expected {len(attributes)}", lineno)
    return [_convert(a, tok, q, lineno) for a, (tok, q) in zip(attributes, fields)]


def parse_mulan(arff_text: bytes | str, label_xml: bytes | str) -> MultiLabelDataset:
    return parse_arff(arff_text, label_names=read_label_names(label_xml))


def _quote(name: str) -> str:
    return name if re.fullmatch(r"[A-Za-z0-9_.\-]+", name) else "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _fmt_num(v: float) -> str:
    return repr(float(v))


def serialize_arff(d: MultiLabelDataset) -> tuple[str, str]:
    """Dense ARFF text with labels as trailing {0,1} attributes, plus the label XML."""
    out = [f"@relation {_quote(d.relation)}", ""]
    for a in d.attributes:
        kind = "{" + ",".join(_quote(v) for v in a.values) + "}" if a.is_nominal else "numeric"
        out.append(f"@attribute {_quote(a.name)} {kind}")
    for name in d.labels:
        out.append(f"@attribute {_quote(name)} {{0,1}}")
    out += ["", "@data"]
    for row, ys in zip(d.features, d.label_sets):
        vals = ["?" if v is None else _quote(v) if isinstance(v, str) else _fmt_num(v) for v in row]
        present = set(ys)
        vals += ["1" if j in present else "0" for j in range(d.m)]
        out.append(",".join(vals))
    xml = ['<?xml version="1.0" encoding="utf-8"?>', '<labels xmlns="http://mulan.sourceforge.net/labels">']
    for name in d.labels:
        esc = name.replace("&", "&amp;").replace('"', "&quot;").replace("<", "&lt;")
        xml.append(f'  <label name="{esc}"></label>')
    xml.append("</labels>")
    return "\n".join(out) + "\n", "\n".join(xml) + "\n"


# ---------------------------------------------------------------- native format


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def serialize_native(d: MultiLabelDataset) -> str:
    attrs = []
    for a in d.attributes:
        rec = {"name": a.name, "kind": a.kind}
        if a.is_nominal:
            rec["values"] = list(a.values)
        attrs.append(rec)
    lines = [_dumps({"format": NATIVE_FORMAT, "version": 1, "relation": d.relation,
                     "attributes": attrs, "labels": list(d.labels)})]
    for row, ys in zip(d.features, d.label_sets):
        lines.append(_dumps({"x": list(row), "y": list(ys)}))
    return "\n".join(lines) + "\n"


def parse_native(text: bytes | str) -> MultiLabelDataset:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty file", 1)
    try:
        schema = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"schema record is not JSON: {exc.msg}", 1) from None
    if not isinstance(schema, dict) or schema.get("format") != NATIVE_FORMAT or schema.get("version") != 1:
        raise ParseError(f"first line must be a {NATIVE_FORMAT} v1 schema record", 1)
    try:
        attributes = tuple(
            Attribute(a["name"], a["kind"], tuple(a.get("values", ()))) for a in schema["attributes"])
        labels = tuple(schema["labels"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"schema record missing field {exc}", 1) from None
    if any(a.kind not in ("numeric", "nominal") for a in attributes):
        raise ParseError("attribute kind must be numeric or nominal", 1)
    m = len(labels)
    features, label_sets = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
            x, y = rec["x"], rec["y"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ParseError("instance record must be a JSON object with x and y", lineno) from None
        if len(x) != len(attributes):
            raise ParseError(f"record has {len(x)} values for {len(attributes)} attributes", lineno)
        row = []
        for attr, v in zip(attributes, x):
            if v is None:
                row.append(MISSING)
            elif attr.is_nominal:
                if v not in attr.values:
                    raise ParseError(f"value {v!r} not declared for {attr.name!r}", lineno)
                row.append(v)
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                row.append(float(v))
            else:
                raise ParseError(f"non-numeric value {v!r} for {attr.name!r}", lineno)
        if any(not isinstance(j, int) or not 0 <= j < m for j in y):
            raise ParseError(f"label index out of range for m={m}", lineno)
        if list(y) != sorted(set(y)):
            raise ParseError("label indices must be sorted and unique", lineno)
        features.append(tuple(row))
        label_sets.append(tuple(y))
    if not features:
        raise ParseError("no instances", len(lines) + 1)
    return MultiLabelDataset(attributes, labels, tuple(features), tuple(label_sets), schema.get("relation", "dataset"))


def load_dataset(path, labels_xml=None, labels_last: int | None = None) -> MultiLabelDataset:
    """Load a native ``.jsonl`` file, or an ARFF file with labels from XML / last:N."""
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() == ".arff":
        if labels_xml is not None:
            return parse_mulan(data, Path(labels_xml).read_bytes())
        xml = path.with_suffix(".xml")
        if labels_last is None and xml.exists():
            return parse_mulan(data, xml.read_bytes())
        return parse_arff(data, last=labels_last)
    return parse_native(data)


# ---------------------------------------------------------------- statistics


@dataclass(frozen=True)
class DatasetStats:
    instance_count: int
    nominal_count: int
    numeric_count: int
    label_count: int
    cardinality: float
    density: float
    label_assignments: int


def dataset_stats(d: MultiLabelDataset) -> DatasetStats:
    total = sum(len(ys) for ys in d.label_sets)
    card = total / len(d)
    nominal = sum(a.is_nominal for a in d.attributes)
    return DatasetStats(len(d), nominal, len(d.attributes) - nominal, d.m, card, card / d.m, total)


@dataclass(frozen=True)
class CooccurrenceTable:
    order: int
    entries: dict = field(default_factory=dict)  # sorted label tuple -> instance count


def cooccurrence(d: MultiLabelDataset, order: int) -> CooccurrenceTable:
    if order < 2:
        raise ValidationError("co-occurrence order must be >= 2")
    counts: dict[tuple[int, ...], int] = {}
    for ys in d.label_sets:
        for combo in itertools.combinations(ys, order):
            counts[combo] = counts.get(combo, 0) + 1
    return CooccurrenceTable(order, dict(sorted(counts.items())))


def make_folds(d: MultiLabelDataset | int, folds: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Random partition into ``folds`` test sets whose sizes differ by at most one."""
    n = d if isinstance(d, int) else len(d)
    if not 2 <= folds <= n:
        raise ValidationError(f"folds must be in [2, {n}], got {folds}")
    order = np.random.default_rng(seed).permutation(n)
    out = []
    for part in np.array_split(order, folds):
        test = np.sort(part)
        train = np.setdiff1d(np.arange(n), test)
        out.append((train, test))
    return out

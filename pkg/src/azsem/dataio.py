"""File formats: dataset CSV, model-config JSON, draws CSV, report JSON,
and run manifests.

Conventions
-----------
Dataset CSV: header row with item names, one row per respondent, comma
separated, ``.`` decimal. Parse errors name the offending line and column.

Model config JSON keys mirror the spec dataclass:
``name, items, n_factors, variant, link, phi_form, augmentation, pattern,
priors``. ``items`` is a list of ``{name, kind[, categories]}``. ``pattern``
is null for EFA variants, otherwise ``{kinds, values, leading}`` where
``kinds`` is a (p, k) grid of "free" / "approx_zero" / "fixed", ``values``
the fixed constants, and ``leading`` 1-based item rows (one per factor).
``priors.psi`` holds ``{kind, c0, a, b, scale, upper}``. All indices in
configs are 1-based; everything in memory is 0-based.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from .fit import Draws
from .model import (
    APPROX_ZERO,
    FIXED,
    FREE,
    Dataset,
    ItemSpec,
    LoadingPattern,
    ModelSpec,
    PriorConfig,
    PsiPrior,
)

KIND_NAMES = {FREE: "free", APPROX_ZERO: "approx_zero", FIXED: "fixed"}
KIND_CODES = {v: k for k, v in KIND_NAMES.items()}


# ------------------------------------------------------------------- datasets


def _infer_item(name: str, col: np.ndarray) -> ItemSpec:
    vals = np.unique(col)
    if np.all(vals == np.round(vals)) and vals.min() >= 0 and vals.max() <= 12:
        top = int(vals.max())
        if top <= 1:
            return ItemSpec(name, "binary")
        return ItemSpec(name, "ordinal", categories=top + 1)
    return ItemSpec(name, "continuous")


def read_dataset(path, items: list[ItemSpec] | None = None) -> Dataset:
    """Read a dataset CSV.

    With ``items`` given, the header must contain those names (order free,
    extra columns ignored) and kinds are taken from the specs. Without,
    kinds are inferred per column: integer codes in {0,1} -> binary, small
    non-negative integer codes -> ordinal, anything else -> continuous.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            parsed = []
            for name, cell in zip(header, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: line {lineno}, column {name!r}: "
                        f"could not parse {cell.strip()!r} as a number"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    values = np.array(rows)
    if items is None:
        specs = [_infer_item(name, values[:, j]) for j, name in enumerate(header)]
        return Dataset(values, specs)
    missing = [it.name for it in items if it.name not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    cols = [header.index(it.name) for it in items]
    return Dataset(values[:, cols], list(items))


def write_dataset(path, data: Dataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([it.name for it in data.items])
        codes = {j for j, it in enumerate(data.items) if it.kind != "continuous"}
        for row in data.values:
            writer.writerow(
                [int(x) if j in codes else repr(float(x)) for j, x in enumerate(row)]
            )


# -------------------------------------------------------------- model configs


def spec_to_dict(spec: ModelSpec) -> dict:
    items = []
    for it in spec.items:
        d = {"name": it.name, "kind": it.kind}
        if it.categories is not None:
            d["categories"] = int(it.categories)
        items.append(d)
    pattern = None
    if spec.pattern is not None:
        pat = spec.pattern
        pattern = {
            "kinds": [[KIND_NAMES[int(k)] for k in row] for row in pat.kinds],
            "values": [[float(v) for v in row] for row in pat.values],
            "leading": [int(r) + 1 for r in pat.leading],
        }
    pri = asdict(spec.priors)
    if pri["omega_scale"] is not None:
        pri["omega_scale"] = np.asarray(pri["omega_scale"]).tolist()
    return {
        "name": spec.name,
        "items": items,
        "n_factors": spec.n_factors,
        "variant": spec.variant,
        "link": spec.link,
        "phi_form": spec.phi_form,
        "augmentation": spec.augmentation,
        "pattern": pattern,
        "priors": pri,
    }


def _check_keys(d: dict, allowed: set, where: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise ValueError(f"{where}: unknown keys {sorted(extra)}")


def spec_from_dict(d: dict) -> ModelSpec:
    _check_keys(
        d,
        {"name", "items", "n_factors", "variant", "link", "phi_form",
         "augmentation", "pattern", "priors"},
        "model config",
    )
    for key in ("items", "n_factors", "variant"):
        if key not in d:
            raise ValueError(f"model config: missing required key {key!r}")
    items = []
    for i, it in enumerate(d["items"]):
        _check_keys(it, {"name", "kind", "categories"}, f"items[{i}]")
        items.append(
            ItemSpec(it["name"], it.get("kind", "continuous"), it.get("categories"))
        )
    pattern = None
    if d.get("pattern") is not None:
        pd = d["pattern"]
        _check_keys(pd, {"kinds", "values", "leading"}, "pattern")
        try:
            kinds = np.array(
                [[KIND_CODES[str(k)] for k in row] for row in pd["kinds"]], dtype=np.int8
            )
        except KeyError as e:
            raise ValueError(
                f"pattern.kinds: unknown code {e.args[0]!r} "
                f"(expected one of {sorted(KIND_CODES)})"
            ) from None
        values = np.asarray(pd.get("values", np.zeros(kinds.shape)), dtype=float)
        leading = tuple(int(r) - 1 for r in pd["leading"])
        pattern = LoadingPattern(kinds=kinds, values=values, leading=leading)
    priors = PriorConfig()
    if d.get("priors") is not None:
        pr = dict(d["priors"])
        _check_keys(pr, set(asdict(priors)), "priors")
        psi = PsiPrior(**pr.pop("psi")) if "psi" in pr else PsiPrior()
        if pr.get("omega_scale") is not None:
            pr["omega_scale"] = np.asarray(pr["omega_scale"], dtype=float)
        priors = PriorConfig(psi=psi, **pr)
    return ModelSpec(
        items=items,
        n_factors=int(d["n_factors"]),
        variant=str(d["variant"]),
        link=str(d.get("link", "identity")),
        pattern=pattern,
        phi_form=str(d.get("phi_form", "correlation")),
        priors=priors,
        augmentation=str(d.get("augmentation", "zu")),
        name=str(d.get("name", "")),
    )


def save_spec(spec: ModelSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)
        fh.write("\n")


def load_spec(path) -> ModelSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from None
    try:
        return spec_from_dict(d)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from None


# --------------------------------------------------------------------- draws


def draws_to_csv(draws: Draws, path, include_latent: bool = False) -> None:
    """Write draws as a flat CSV: chain, draw, then one column per
    constrained structural parameter (latent z/u/h rows opt-in)."""
    packer = draws.posterior.packer
    names = packer.structural_names()
    params = [
        [packer.unpack(draws.values[c, s])[0] for s in range(draws.n_samples)]
        for c in range(draws.n_chains)
    ]
    latent_cols = []
    if include_latent:
        ps0 = params[0][0]
        for block in ("z", "u", "h"):
            arr = getattr(ps0, block)
            if arr is not None:
                latent_cols.append((block, arr.shape))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        head = ["chain", "draw"] + names
        for block, shape in latent_cols:
            head += [f"{block}[{i + 1},{j + 1}]" for i in range(shape[0]) for j in range(shape[1])]
        writer.writerow(head)
        for c in range(draws.n_chains):
            for s in range(draws.n_samples):
                ps = params[c][s]
                row = [c + 1, s + 1] + [repr(float(x)) for x in packer.structural_values(ps)]
                for block, _ in latent_cols:
                    row += [repr(float(x)) for x in getattr(ps, block).ravel()]
                writer.writerow(row)


# ------------------------------------------------------------------ manifests


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record written alongside every command output."""

    command: tuple[str, ...]
    seed: int | None
    version: str
    inputs: dict  # path -> sha256
    outputs: tuple[str, ...]
    created: str

    @staticmethod
    def build(argv, seed, input_paths, output_paths) -> "RunManifest":
        from . import __version__

        return RunManifest(
            command=tuple(str(a) for a in argv),
            seed=None if seed is None else int(seed),
            version=__version__,
            inputs={str(p): sha256_file(p) for p in input_paths},
            outputs=tuple(str(p) for p in output_paths),
            created=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2)
            fh.write("\n")


def write_json(obj: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")

"""
Storage utilities for saving and loading datasets, agents, anchors and reports.

Matrices use the SEQM binary format: the 4-byte magic "SEQM", a little-endian
uint16 version, little-endian uint64 row and column counts, then rows*cols
little-endian float64 values in row-major order. Manifests are UTF-8 JSON.
Every command writes through `staged_output`, so a failed run leaves no files.
"""

import csv
import json
import os
import shutil
import struct
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Union

import numpy as np
import numpy.typing as npt

from semeq.agents.agent import Agent
from semeq.agents.datasets import Dataset
from semeq.agents.decoders import Decoder
from semeq.agents.encoders import Encoder, EncoderKind
from semeq.anchors.selection import AnchorSupport
from semeq.errors import InvalidArgumentError, MatrixFormatError
from semeq.evaluation.sweep import SweepRow
from semeq.relative import AbsoluteAnchors

PathLike = Union[str, Path]

MATRIX_MAGIC = b"SEQM"
MATRIX_VERSION = 1
MATRIX_HEADER = struct.Struct("<4sHQQ")

NOT_APPLICABLE = "NA"
REPORT_COLUMNS = [
    "tx_id",
    "rx_id",
    "similarity",
    "inverse_method",
    "anchor_method",
    "anchor_count",
    "seed",
    "matched_acc",
    "cross_acc_uneq",
    "cross_acc_eq",
    "agreement",
    "mean_gse",
]
SCATTER_COLUMNS = [
    "tx_id",
    "rx_id",
    "anchor_method",
    "anchor_count",
    "inverse_method",
    "seed",
    "sample",
    "gse",
    "correct",
    "agreement",
    "true_label",
    "predicted_label",
]


def get_data_root() -> Path:
    """
    Get the data root directory from environment variable or default.

    Returns:
        Path object for the data root directory
    """
    return Path(os.getenv("SEMEQ_DATA_ROOT", "./data"))


def get_output_dir(name: str) -> Path:
    """
    Directory for a named output under the data root, e.g. 'datasets/standard'.

    The directory is not created; `staged_output` creates it on success.
    """
    return get_data_root() / name


def encode_matrix(matrix: npt.ArrayLike) -> bytes:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[np.newaxis, :]
    if matrix.ndim != 2:
        raise InvalidArgumentError(f"only 1-D or 2-D arrays can be stored, got {matrix.shape}")
    rows, cols = matrix.shape
    header = MATRIX_HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, rows, cols)
    return header + np.ascontiguousarray(matrix, dtype="<f8").tobytes()


def decode_matrix(payload: bytes) -> np.ndarray:
    """
    Parse SEQM bytes into a float64 matrix.

    Raises:
        MatrixFormatError: On a bad magic, unknown version or wrong payload length
    """
    if len(payload) < MATRIX_HEADER.size:
        raise MatrixFormatError("matrix file is shorter than its header")
    magic, version, rows, cols = MATRIX_HEADER.unpack_from(payload)
    if magic != MATRIX_MAGIC:
        raise MatrixFormatError(f"bad matrix magic {magic!r}")
    if version != MATRIX_VERSION:
        raise MatrixFormatError(f"unsupported matrix version {version}")
    expected = rows * cols * 8
    body = payload[MATRIX_HEADER.size :]
    if len(body) != expected:
        raise MatrixFormatError(
            f"matrix of shape ({rows}, {cols}) needs {expected} payload bytes, found {len(body)}"
        )
    return np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(rows, cols)


def write_matrix(path: PathLike, matrix: npt.ArrayLike) -> str:
    with open(path, "wb") as f:
        f.write(encode_matrix(matrix))
    return str(path)


def read_matrix(path: PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_matrix(f.read())


def load_json(path: PathLike) -> Dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def format_value(value: Optional[float]) -> str:
    """CSV text of a report value: 9 significant digits, NA for missing."""
    if value is None:
        return NOT_APPLICABLE
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.9g}"


class OutputStage:
    """Files written here appear under `target` only when the stage commits."""

    def __init__(self, target: Path, staging: Path):
        self.target = target
        self.staging = staging

    def path(self, relative: PathLike) -> Path:
        staged = self.staging / relative
        staged.parent.mkdir(parents=True, exist_ok=True)
        return staged

    def write_matrix(self, relative: PathLike, matrix: npt.ArrayLike) -> Path:
        staged = self.path(relative)
        write_matrix(staged, matrix)
        return self.target / relative

    def write_json(self, relative: PathLike, data: Dict) -> Path:
        staged = self.path(relative)
        with open(staged, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")
        return self.target / relative

    def write_csv(
        self, relative: PathLike, header: Sequence[str], rows: Sequence[Sequence]
    ) -> Path:
        staged = self.path(relative)
        with open(staged, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        return self.target / relative

    def commit(self):
        for staged in sorted(p for p in self.staging.rglob("*") if p.is_file()):
            final = self.target / staged.relative_to(self.staging)
            final.parent.mkdir(parents=True, exist_ok=True)
            os.replace(staged, final)


@contextmanager
def staged_output(target: PathLike) -> Iterator[OutputStage]:
    """
    Stage output files and move them under `target` when the block succeeds.

    The staging directory is a sibling of `target` so the final moves are
    renames on the same filesystem. On any exception it is removed and
    nothing under `target` changes.
    """
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent))
    try:
        stage = OutputStage(target, staging)
        yield stage
        stage.commit()
    finally:
        shutil.rmtree(staging, ignore_errors=True)


# Datasets


def write_dataset(stage: OutputStage, split: str, data: Dataset, params: Optional[Dict] = None):
    stage.write_matrix(f"{split}/samples.seqm", data.samples)
    stage.write_matrix(f"{split}/labels.seqm", data.labels.astype(np.float64)[:, np.newaxis])
    stage.write_json(
        f"{split}/manifest.json",
        {
            "split": split,
            "size": data.size,
            "input_dim": data.input_dim,
            "class_count": data.class_count,
            "seed": data.seed,
            "params": params or {},
        },
    )


def load_dataset(directory: PathLike, split: str = "train") -> Dataset:
    """
    Load one split of a dataset directory written by `gen-data`.

    Raises:
        FileNotFoundError: If the split does not exist
        MatrixFormatError: If the files disagree with the manifest
    """
    split_dir = Path(directory) / split
    manifest = load_json(split_dir / "manifest.json")
    samples = read_matrix(split_dir / "samples.seqm")
    labels = read_matrix(split_dir / "labels.seqm")
    if labels.shape != (samples.shape[0], 1) or samples.shape[0] != manifest["size"]:
        raise MatrixFormatError(f"dataset files in {split_dir} disagree with the manifest")
    return Dataset(
        samples=samples,
        labels=labels[:, 0].astype(np.int64),
        class_count=manifest["class_count"],
        seed=manifest["seed"],
    )


# Agents


def write_agent(stage: OutputStage, agent: Agent, training: Optional[Dict] = None):
    encoder = agent.encoder
    stage.write_matrix("encoder_weights.seqm", encoder.weights)
    stage.write_matrix("encoder_bias.seqm", encoder.bias)
    if encoder.kind is EncoderKind.MLP:
        stage.write_matrix("encoder_output_weights.seqm", encoder.output_weights)
        stage.write_matrix("encoder_output_bias.seqm", encoder.output_bias)
    stage.write_matrix("decoder_weights.seqm", agent.decoder.weights)
    stage.write_matrix("decoder_bias.seqm", agent.decoder.bias)
    stage.write_json(
        "manifest.json",
        {
            "id": agent.id,
            "kind": encoder.kind.value,
            "encoder_name": encoder.name,
            "input_dim": encoder.input_dim,
            "latent_dim": encoder.latent_dim,
            "seed": encoder.seed,
            "scale": encoder.scale,
            "class_count": agent.decoder.class_count,
            "training": training or {},
        },
    )


def load_agent(directory: PathLike) -> Agent:
    directory = Path(directory)
    manifest = load_json(directory / "manifest.json")
    kind = EncoderKind(manifest["kind"])
    output_weights = output_bias = None
    if kind is EncoderKind.MLP:
        output_weights = read_matrix(directory / "encoder_output_weights.seqm")
        output_bias = read_matrix(directory / "encoder_output_bias.seqm")[0]
    encoder = Encoder(
        kind=kind,
        input_dim=manifest["input_dim"],
        latent_dim=manifest["latent_dim"],
        seed=manifest["seed"],
        weights=read_matrix(directory / "encoder_weights.seqm"),
        bias=read_matrix(directory / "encoder_bias.seqm")[0],
        output_weights=output_weights,
        output_bias=output_bias,
        scale=manifest["scale"],
    )
    decoder = Decoder(
        weights=read_matrix(directory / "decoder_weights.seqm"),
        bias=read_matrix(directory / "decoder_bias.seqm")[0],
    )
    return Agent(encoder=encoder, decoder=decoder, id=manifest["id"])


# Anchor supports and encoded anchors


def write_support(stage: OutputStage, support: AnchorSupport):
    stage.write_matrix("support.seqm", support.stacked())
    stage.write_json(
        "support.json",
        {
            "count": support.count,
            "group_sizes": list(support.group_sizes),
            "support_size": support.support_size,
            "input_dim": support.input_dim,
            "seed": support.seed,
            "method": support.method.value,
            "source_encoder_id": support.source_encoder_id,
            "indices": [rows.tolist() for rows in support.indices],
            "notes": list(support.notes),
            "fingerprint": support.fingerprint,
        },
    )


def load_support(directory: PathLike) -> AnchorSupport:
    """
    Raises:
        MatrixFormatError: If the stored samples no longer match the fingerprint
    """
    directory = Path(directory)
    meta = load_json(directory / "support.json")
    stacked = read_matrix(directory / "support.seqm")
    sizes = meta["group_sizes"]
    if sum(sizes) != stacked.shape[0]:
        raise MatrixFormatError("support group sizes do not add up to the stored samples")
    bounds = np.cumsum(sizes)[:-1]
    support = AnchorSupport(
        groups=tuple(np.split(stacked, bounds)),
        indices=tuple(np.asarray(rows, dtype=np.int64) for rows in meta["indices"]),
        method=meta["method"],
        seed=meta["seed"],
        source_encoder_id=meta["source_encoder_id"],
        notes=tuple(meta["notes"]),
    )
    if support.fingerprint != meta["fingerprint"]:
        raise MatrixFormatError("support samples do not match the recorded fingerprint")
    return support


def write_anchors(stage: OutputStage, agent_id: str, anchors: AbsoluteAnchors):
    stage.write_matrix(f"{agent_id}/anchors.seqm", anchors.matrix)
    stage.write_json(
        f"{agent_id}/anchors.json",
        {
            "agent_id": agent_id,
            "encoder_id": anchors.encoder_id,
            "support_id": anchors.support_id,
            "count": anchors.count,
            "latent_dim": anchors.latent_dim,
        },
    )


def load_anchors(directory: PathLike, agent_id: str) -> AbsoluteAnchors:
    agent_dir = Path(directory) / agent_id
    meta = load_json(agent_dir / "anchors.json")
    return AbsoluteAnchors(
        matrix=read_matrix(agent_dir / "anchors.seqm"),
        encoder_id=meta["encoder_id"],
        support_id=meta["support_id"],
    )


# Reports


def report_row(row: SweepRow) -> List[str]:
    report = row.report
    return [
        row.tx_id,
        row.rx_id,
        row.similarity.value,
        row.cell.inverse_method,
        row.cell.anchor_method,
        format_value(report.anchor_count),
        format_value(row.cell.seed),
        format_value(report.matched_accuracy),
        format_value(report.cross_accuracy_unequalized),
        format_value(report.cross_accuracy_equalized),
        format_value(report.decoder_agreement),
        format_value(report.mean_reconstruction_error),
    ]


def scatter_rows(row: SweepRow) -> List[List[str]]:
    """Per-sample rows of one report, for error-versus-accuracy plots."""
    cell = row.cell
    return [
        [
            row.tx_id,
            row.rx_id,
            cell.anchor_method,
            format_value(row.report.anchor_count),
            cell.inverse_method,
            format_value(cell.seed),
            str(index),
            format_value(record.gse),
            str(int(record.predicted_label == record.true_label)),
            str(record.ggo),
            str(record.true_label),
            str(record.predicted_label),
        ]
        for index, record in enumerate(row.report.per_sample_records)
    ]


def write_report(stage: OutputStage, relative: PathLike, rows: Sequence[SweepRow]) -> Path:
    return stage.write_csv(relative, REPORT_COLUMNS, [report_row(row) for row in rows])


def write_scatter(stage: OutputStage, relative: PathLike, rows: Sequence[SweepRow]) -> Path:
    lines = [line for row in rows for line in scatter_rows(row)]
    return stage.write_csv(relative, SCATTER_COLUMNS, lines)


def read_csv_rows(path: PathLike) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))

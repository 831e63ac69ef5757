"""
CLI for semantic channel equalization experiments.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

from semeq.agents import encode, gen_gaussian_mixture, split_dataset, train_agent
from semeq.agents.agent import Agent
from semeq.agents.decoders import DEFAULT_DECODER_LEARNING_RATE, DEFAULT_EPOCHS, accuracy
from semeq.agents.encoders import EncoderKind
from semeq.anchors import (
    DEFAULT_SUPPORT_SIZE,
    AnchorMethod,
    AnchorSupport,
    encode_support,
    select_support,
)
from semeq.config import (
    STANDARD_CLASS_COUNT,
    STANDARD_INPUT_DIM,
    STANDARD_LATENT_DIM,
    STANDARD_SEPARATION,
    STANDARD_TEST_PER_CLASS,
    STANDARD_TRAIN_PER_CLASS,
    RunConfig,
    get_thread_count,
)
from semeq.errors import InvalidConfigurationError
from semeq.evaluation import (
    Equalizer,
    InverseMethod,
    SweepCell,
    SweepRow,
    check_provenance,
    equalize_batch,
    error_accuracy_correlation,
    evaluate_cell,
    evaluate_pair,
    mean_accuracy_by_setting,
    reconstruction_inversions,
    scatter_correlation,
    sweep_anchor_counts,
)
from semeq.inverse import DEFAULT_MAX_ITERATIONS, DEFAULT_INVERSE_LEARNING_RATE, InverseConfig
from semeq.relative import AbsoluteAnchors, SimilarityKind
from semeq.storage import (
    get_output_dir,
    load_agent,
    load_anchors,
    load_dataset,
    load_support,
    read_matrix,
    staged_output,
    write_agent,
    write_anchors,
    write_dataset,
    write_report,
    write_scatter,
    write_support,
)

# Load environment variables
load_dotenv()


def positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return number


def non_negative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {value}")
    return number


def positive_float(value: str) -> float:
    number = float(value)
    if not number > 0.0 or not np.isfinite(number):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {value}")
    return number


def int_list(value: str) -> list:
    try:
        numbers = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")
    if not numbers:
        raise argparse.ArgumentTypeError("expected at least one value")
    return numbers


def choice_list(choices):
    def parse(value: str) -> list:
        items = [part.strip() for part in value.split(",") if part.strip()]
        unknown = [item for item in items if item not in choices]
        if not items or unknown:
            raise argparse.ArgumentTypeError(
                f"expected comma-separated values from {', '.join(choices)}, got {value!r}"
            )
        return items

    return parse


def inverse_config_from_args(args, init_seed: int = 0) -> InverseConfig:
    return InverseConfig(
        max_iterations=args.max_iter,
        learning_rate=args.lr,
        init_seed=init_seed,
        restarts=args.restarts,
    )


def resolve_out(path, name: str) -> Path:
    # Fall back to SEMEQ_DATA_ROOT when --out is omitted
    return Path(path) if path else get_output_dir(name)


def anchors_for(anchors_dir: Path, agent: Agent, support: AnchorSupport) -> AbsoluteAnchors:
    """Stored anchors of `agent` when the anchors command wrote them, else encode the support."""
    if (anchors_dir / agent.id / "anchors.json").exists():
        anchors = load_anchors(anchors_dir, agent.id)
        if anchors.support_id != support.fingerprint:
            raise InvalidConfigurationError(
                f"anchors of {agent.id!r} in {anchors_dir} were built from support "
                f"{str(anchors.support_id)[:12]}, not the stored support {support.fingerprint[:12]}"
            )
        return anchors
    return encode_support(agent.encoder, support)


def gen_data_command(args):
    """Generate a Gaussian-mixture dataset and save its train/test splits."""
    try:
        out = resolve_out(args.out, "datasets/default")
        print(f"Generating {args.classes} classes in {args.dim} dimensions...")
        data = gen_gaussian_mixture(
            args.classes,
            args.dim,
            args.per_class + args.test_per_class,
            separation=args.separation,
            seed=args.seed,
        )
        train, test = split_dataset(data, args.test_per_class)
        params = {
            "classes": args.classes,
            "dim": args.dim,
            "per_class": args.per_class,
            "test_per_class": args.test_per_class,
            "separation": args.separation,
            "seed": args.seed,
        }
        with staged_output(out) as stage:
            write_dataset(stage, "train", train, params)
            write_dataset(stage, "test", test, params)
        print(f"Saved {train.size} train and {test.size} test samples to {out}")

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def train_agent_command(args):
    """Draw an encoder, train its decoder and save the agent."""
    try:
        out = resolve_out(args.out, f"agents/{args.id}")
        train = load_dataset(args.data, "train")
        test = load_dataset(args.data, "test")
        print(f"Training agent {args.id} ({args.kind}, latent dim {args.latent_dim})...")
        agent = train_agent(
            args.id,
            train,
            args.kind,
            args.latent_dim,
            args.seed,
            scale=args.scale,
            epochs=args.epochs,
            lr=args.lr,
        )
        matched = accuracy(agent.decoder, encode(agent.encoder, test.samples), test.labels)
        training = {"epochs": args.epochs, "lr": args.lr, "data": str(args.data)}
        with staged_output(out) as stage:
            write_agent(stage, agent, training)
        print(f"Matched accuracy: {matched:.4f}")
        print(f"Saved agent {agent.encoder.name} to {out}")

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def anchors_command(args):
    """Select an anchor support and save it with each agent's encoded anchors."""
    try:
        out = resolve_out(args.out, "anchors/default")
        data = load_dataset(args.data, args.split)
        agents = [load_agent(path) for path in args.agent]
        print(f"Selecting {args.count} {args.method} anchors from {data.size} samples...")
        support = select_support(
            args.method,
            agents[0].encoder,
            data,
            args.count,
            m_per_cluster=args.support_size,
            seed=args.seed,
        )
        for note in support.notes:
            print(f"Note: {note}")
        with staged_output(out) as stage:
            write_support(stage, support)
            for agent in agents:
                write_anchors(stage, agent.id, encode_support(agent.encoder, support))
        print(f"Saved support {support.fingerprint[:12]} with {support.count} anchors to {out}")

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def equalize_command(args):
    """Equalize transmitter latents (a vector or a matrix file) into the receiver's space."""
    try:
        tx = load_agent(args.tx)
        rx = load_agent(args.rx)
        anchors_dir = Path(args.anchors)
        support = load_support(anchors_dir)
        if args.vector:
            latents = np.array([[float(part) for part in args.vector.split(",")]])
        else:
            latents = read_matrix(args.input)
        equalizer = Equalizer(
            transmitter_anchors=anchors_for(anchors_dir, tx, support),
            receiver_anchors=anchors_for(anchors_dir, rx, support),
            similarity=args.similarity,
            inverse_method=args.inverse,
            inverse_config=inverse_config_from_args(args, init_seed=args.seed),
        )
        check_provenance(tx, equalizer.transmitter_anchors, "transmitter")
        check_provenance(rx, equalizer.receiver_anchors, "receiver")
        z_hat = equalize_batch(latents, equalizer)

        if args.out:
            out = Path(args.out)
            with staged_output(out.parent) as stage:
                stage.write_matrix(out.name, z_hat)
            print(f"Saved {z_hat.shape[0]} equalized latents to {out}")
        else:
            for row in z_hat:
                print(",".join(f"{value:.9g}" for value in row))

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def build_run_config(args, anchor_methods, anchor_counts, inverse_methods, seeds) -> RunConfig:
    return RunConfig(
        data_dir=Path(args.data),
        tx_dir=Path(args.tx),
        rx_dir=Path(args.rx),
        output_dir=resolve_out(args.out, f"reports/{args.command}"),
        anchor_methods=tuple(AnchorMethod(m) for m in anchor_methods),
        anchor_counts=tuple(anchor_counts),
        support_size=args.support_size,
        similarity=SimilarityKind(args.similarity),
        inverse_methods=tuple(InverseMethod(m) for m in inverse_methods),
        inverse_config=inverse_config_from_args(args),
        seeds=tuple(seeds),
    ).validate()


def evaluate_command(args):
    """Evaluate one equalized agent pair and write a one-row report."""
    try:
        train = load_dataset(args.data, "train")
        test = load_dataset(args.data, "test")
        tx = load_agent(args.tx)
        rx = load_agent(args.rx)

        if args.anchors:
            anchors_dir = Path(args.anchors)
            support = load_support(anchors_dir)
            config = build_run_config(
                args, [support.method], [support.count], [args.inverse], [args.seed]
            )
            cell = config.cells()[0]
            equalizer = Equalizer(
                transmitter_anchors=anchors_for(anchors_dir, tx, support),
                receiver_anchors=anchors_for(anchors_dir, rx, support),
                similarity=config.similarity,
                inverse_method=args.inverse,
                inverse_config=replace(
                    config.inverse_config, init_seed=cell.inverse_seed(config.similarity)
                ),
            )
            report = evaluate_pair(tx, rx, equalizer, test)
            row = SweepRow(tx.id, rx.id, config.similarity, cell, report)
        else:
            config = build_run_config(
                args, [args.method], [args.count], [args.inverse], [args.seed]
            )
            config.validate_against(train)
            row = evaluate_cell(
                tx,
                rx,
                config.cells()[0],
                config.similarity,
                test,
                anchor_data=train,
                support_size=config.support_size,
                base_config=config.inverse_config,
            )

        with staged_output(config.output_dir) as stage:
            path = write_report(stage, "report.csv", [row])
        report = row.report
        print(f"Matched accuracy: {report.matched_accuracy:.4f}")
        if report.cross_accuracy_unequalized is not None:
            print(f"Unequalized cross accuracy: {report.cross_accuracy_unequalized:.4f}")
        print(f"Equalized cross accuracy: {report.cross_accuracy_equalized:.4f}")
        print(f"Decoder agreement: {report.decoder_agreement:.4f}")
        print(f"Mean reconstruction error: {report.mean_reconstruction_error:.6g}")
        print(f"Saved report to {path}")

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def sweep_command(args):
    """Sweep anchor methods, counts, inverse methods and seeds for one agent pair."""
    try:
        config = build_run_config(args, args.methods, args.counts, args.inverse, args.seeds)
        train = load_dataset(config.data_dir, "train")
        test = load_dataset(config.data_dir, "test")
        config.validate_against(train)
        tx = load_agent(config.tx_dir)
        rx = load_agent(config.rx_dir)
        workers = get_thread_count(args.threads)
        print(f"Sweeping {len(config.cells())} cells for {tx.id} -> {rx.id}...")

        rows = sweep_anchor_counts(
            tx,
            rx,
            config.anchor_counts,
            config.anchor_methods,
            config.similarity,
            config.inverse_methods,
            config.seeds,
            test,
            anchor_data=train,
            support_size=config.support_size,
            base_config=config.inverse_config,
            workers=workers,
        )
        correlation = error_accuracy_correlation(rows)
        pooled = scatter_correlation(rows)
        inversions = reconstruction_inversions(rows)
        means = mean_accuracy_by_setting(rows)
        summary = {
            "config": config.to_dict(),
            "cells": len(rows),
            "error_accuracy_spearman": correlation,
            "scatter_spearman": pooled,
            "reconstruction_inversions": [
                [cell_summary(a), cell_summary(b)] for a, b in inversions
            ],
            "mean_equalized_accuracy": [
                {
                    "anchor_method": method,
                    "anchor_count": count,
                    "inverse_method": inverse,
                    "accuracy": value,
                }
                for (method, count, inverse), value in means.items()
            ],
        }

        with staged_output(config.output_dir) as stage:
            path = write_report(stage, "report.csv", rows)
            write_scatter(stage, "scatter.csv", rows)
            stage.write_json("summary.json", summary)

        for (method, count, inverse), value in means.items():
            print(f"{method:>6} {count:>4} {inverse:<18} equalized accuracy {value:.4f}")
        if correlation is not None:
            print(f"Spearman(mean g_se, accuracy) across cells: {correlation:.4f}")
        print(f"Cell pairs where lower error gave lower accuracy: {len(inversions)}")
        print(f"Saved {len(rows)} rows to {path}")

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def cell_summary(cell: SweepCell) -> dict:
    return {
        "anchor_method": cell.anchor_method,
        "anchor_count": cell.anchor_count,
        "inverse_method": cell.inverse_method,
        "seed": cell.seed,
    }


def add_inverse_arguments(parser):
    parser.add_argument(
        "--similarity",
        choices=[kind.value for kind in SimilarityKind],
        default=SimilarityKind.NORMALIZED_EUCLIDEAN.value,
        help="Similarity of the relative space (default: normalized_euclidean)",
    )
    parser.add_argument(
        "--max-iter", type=positive_int, default=DEFAULT_MAX_ITERATIONS, help="Inverse iterations"
    )
    parser.add_argument(
        "--lr",
        type=positive_float,
        default=DEFAULT_INVERSE_LEARNING_RATE,
        help="Inverse step size in units of the largest anchor norm",
    )
    parser.add_argument(
        "--restarts", type=positive_int, default=1, help="Seeded starts per sample (default: 1)"
    )


def cli():
    """Semantic channel equalization - data, agents, anchors and evaluation."""
    parser = argparse.ArgumentParser(
        description="Semantic channel equalization through relative representations"
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="Log INFO (-v) or DEBUG (-vv) to stderr"
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")
    inverse_choices = [method.value for method in InverseMethod]
    anchor_choices = [method.value for method in AnchorMethod]

    # gen-data command
    gen_parser = subparsers.add_parser("gen-data", help="Generate a synthetic Gaussian mixture")
    gen_parser.add_argument("--classes", type=positive_int, default=STANDARD_CLASS_COUNT)
    gen_parser.add_argument("--dim", type=positive_int, default=STANDARD_INPUT_DIM)
    gen_parser.add_argument(
        "--per-class",
        type=positive_int,
        default=STANDARD_TRAIN_PER_CLASS,
        help="Train samples per class",
    )
    gen_parser.add_argument(
        "--test-per-class",
        type=positive_int,
        default=STANDARD_TEST_PER_CLASS,
        help="Test samples per class",
    )
    gen_parser.add_argument("--separation", type=positive_float, default=STANDARD_SEPARATION)
    gen_parser.add_argument("--seed", type=non_negative_int, default=0)
    gen_parser.add_argument("--out", help="Output directory (defaults under SEMEQ_DATA_ROOT)")
    gen_parser.set_defaults(func=gen_data_command)

    # train-agent command
    train_parser = subparsers.add_parser(
        "train-agent", help="Draw an encoder and train its decoder"
    )
    train_parser.add_argument("--data", required=True, help="Dataset directory")
    train_parser.add_argument("--id", required=True, help="Agent id")
    train_parser.add_argument(
        "--kind", choices=[kind.value for kind in EncoderKind], default=EncoderKind.MLP.value
    )
    train_parser.add_argument("--latent-dim", type=positive_int, default=STANDARD_LATENT_DIM)
    train_parser.add_argument("--seed", type=non_negative_int, default=0)
    train_parser.add_argument("--scale", type=positive_float, default=1.0)
    train_parser.add_argument("--epochs", type=positive_int, default=DEFAULT_EPOCHS)
    train_parser.add_argument("--lr", type=positive_float, default=DEFAULT_DECODER_LEARNING_RATE)
    train_parser.add_argument("--out", help="Output directory (defaults under SEMEQ_DATA_ROOT)")
    train_parser.set_defaults(func=train_agent_command)

    # anchors command
    anchors_parser = subparsers.add_parser("anchors", help="Select and encode an anchor support")
    anchors_parser.add_argument("--data", required=True, help="Dataset directory")
    anchors_parser.add_argument(
        "--agent",
        action="append",
        required=True,
        help="Agent directory; repeatable, the first one clusters prototypical anchors",
    )
    anchors_parser.add_argument(
        "--method", choices=anchor_choices, default=AnchorMethod.PROTOTYPICAL.value
    )
    anchors_parser.add_argument("--count", type=positive_int, required=True)
    anchors_parser.add_argument("--support-size", type=positive_int, default=DEFAULT_SUPPORT_SIZE)
    anchors_parser.add_argument("--split", choices=["train", "test"], default="train")
    anchors_parser.add_argument("--seed", type=non_negative_int, default=0)
    anchors_parser.add_argument("--out", help="Output directory (defaults under SEMEQ_DATA_ROOT)")
    anchors_parser.set_defaults(func=anchors_command)

    # equalize command
    equalize_parser = subparsers.add_parser(
        "equalize", help="Equalize latents into a receiver's space"
    )
    equalize_parser.add_argument("--tx", required=True, help="Transmitter agent directory")
    equalize_parser.add_argument("--rx", required=True, help="Receiver agent directory")
    equalize_parser.add_argument("--anchors", required=True, help="Anchors directory")
    source = equalize_parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--vector", help="Comma-separated transmitter latent")
    source.add_argument("--input", help="SEQM file of transmitter latents, one per row")
    equalize_parser.add_argument(
        "--inverse", choices=inverse_choices, default=InverseMethod.GRADIENT.value
    )
    equalize_parser.add_argument(
        "--seed", type=non_negative_int, default=0, help="Inverse init seed"
    )
    equalize_parser.add_argument("--out", help="SEQM file for the result (default: print)")
    add_inverse_arguments(equalize_parser)
    equalize_parser.set_defaults(func=equalize_command)

    # evaluate command
    evaluate_parser = subparsers.add_parser("evaluate", help="Evaluate one equalized agent pair")
    evaluate_parser.add_argument("--data", required=True, help="Dataset directory")
    evaluate_parser.add_argument("--tx", required=True, help="Transmitter agent directory")
    evaluate_parser.add_argument("--rx", required=True, help="Receiver agent directory")
    evaluate_parser.add_argument(
        "--anchors", help="Anchors directory; when omitted a support is drawn from --method/--count"
    )
    evaluate_parser.add_argument(
        "--method", choices=anchor_choices, default=AnchorMethod.PROTOTYPICAL.value
    )
    evaluate_parser.add_argument("--count", type=positive_int, default=2 * STANDARD_LATENT_DIM)
    evaluate_parser.add_argument("--support-size", type=positive_int, default=DEFAULT_SUPPORT_SIZE)
    evaluate_parser.add_argument(
        "--inverse", choices=inverse_choices, default=InverseMethod.GRADIENT.value
    )
    evaluate_parser.add_argument("--seed", type=non_negative_int, default=0, help="Run seed")
    evaluate_parser.add_argument("--out", help="Output directory (defaults under SEMEQ_DATA_ROOT)")
    add_inverse_arguments(evaluate_parser)
    evaluate_parser.set_defaults(func=evaluate_command)

    # sweep command
    sweep_parser = subparsers.add_parser("sweep", help="Sweep anchor settings for one agent pair")
    sweep_parser.add_argument("--data", required=True, help="Dataset directory")
    sweep_parser.add_argument("--tx", required=True, help="Transmitter agent directory")
    sweep_parser.add_argument("--rx", required=True, help="Receiver agent directory")
    sweep_parser.add_argument(
        "--methods", type=choice_list(anchor_choices), default=[AnchorMethod.PROTOTYPICAL.value]
    )
    sweep_parser.add_argument("--counts", type=int_list, default=[8, 16, 32, 64])
    sweep_parser.add_argument("--support-size", type=positive_int, default=DEFAULT_SUPPORT_SIZE)
    sweep_parser.add_argument(
        "--inverse", type=choice_list(inverse_choices), default=[InverseMethod.GRADIENT.value]
    )
    sweep_parser.add_argument("--seeds", type=int_list, default=[0])
    sweep_parser.add_argument(
        "--threads",
        type=positive_int,
        help="Worker threads, capped by SEMEQ_THREADS (defaults to it or the CPU count)",
    )
    sweep_parser.add_argument("--out", help="Output directory (defaults under SEMEQ_DATA_ROOT)")
    add_inverse_arguments(sweep_parser)
    sweep_parser.set_defaults(func=sweep_command)

    args = parser.parse_args()

    if not args.command:
        parser.print_help()
        sys.exit(1)

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    args.func(args)


if __name__ == "__main__":
    cli()

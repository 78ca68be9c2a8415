"""Training loop: phase-1 epochs, then phase-2 epochs, one model.

Every knob lives on TrainRun and is copied into the run manifest, so a
checkpoint can always answer "what produced you". Determinism contract:
a fixed seed fixes the parameter init, the batch order of every epoch,
and therefore the whole loss curve. Batch order is drawn from its own
generator keyed on (seed, phase, epoch); nothing else consumes it.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, asdict
from pathlib import Path

import torch
from torch.nn import functional as F

from .data import (OBJECTIVES, Batch, Sample, SampleError, batched,
                   encode_sample, make_batch, read_samples)
from .model import ModelConfig, TinySeq2Seq
from .vocab import Vocab, build_vocab


@dataclass(frozen=True)
class TrainRun:
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    max_len: int = 256
    lr: float = 1e-5
    weight_decay: float = 0.01
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    objective: str = "both"

    def __post_init__(self) -> None:
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, d_model=self.d_model,
                           n_heads=self.n_heads, n_layers=self.n_layers,
                           d_ff=self.d_ff, max_len=self.max_len)


@dataclass
class Trained:
    model: TinySeq2Seq
    vocab: Vocab
    manifest: dict


def _token_ce(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    return F.cross_entropy(logits.reshape(-1, logits.size(-1)),
                           labels.reshape(-1), reduction="none"
                           ).reshape(labels.shape)


def _phase_epochs(model: TinySeq2Seq, optimizer, encoded, run: TrainRun,
                  phase: str, losses: list[dict]) -> None:
    model.train()
    for epoch in range(run.epochs):
        order = list(range(len(encoded)))
        random.Random(f"{run.seed}:{phase}:{epoch}").shuffle(order)
        sums = {"train": 0.0, "total": 0.0, "or": 0.0, "ntg": 0.0}
        counts = {"train": 0, "total": 0, "or": 0, "ntg": 0}
        for chunk in batched(order, run.batch_size):
            batch: Batch = make_batch([encoded[i] for i in chunk], pad_id=0)
            logits = model(batch.src, batch.src_pad, batch.tgt_in)
            ce = _token_ce(logits, batch.labels)
            train_mask = batch.keep & ~batch.label_pad
            n_train = int(train_mask.sum())
            if n_train:
                loss = ce[train_mask].sum() / n_train
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            with torch.no_grad():
                detached = ce.detach()
                for name, mask in (
                    ("train", train_mask),
                    ("total", ~batch.label_pad),
                    ("or", batch.in_or & ~batch.label_pad),
                    ("ntg", ~batch.in_or & ~batch.label_pad),
                ):
                    sums[name] += float(detached[mask].sum())
                    counts[name] += int(mask.sum())
        entry = {"phase": phase, "epoch": epoch}
        for name in ("train", "total", "or", "ntg"):
            entry[f"{name}_loss"] = (
                sums[name] / counts[name] if counts[name] else None)
        losses.append(entry)


def train(phase1: str | None, phase2: str | None, run: TrainRun) -> Trained:
    """Fit one model on the given sample files, phase-1 first."""
    if phase1 is None and phase2 is None:
        raise ValueError("at least one sample file is required")
    phases: list[tuple[str, list[Sample]]] = []
    for name, path in (("phase1", phase1), ("phase2", phase2)):
        if path is not None:
            phases.append((name, read_samples(path)))
    all_samples = [s for _, batch in phases for s in batch]
    if not all_samples:
        raise SampleError("sample files contain no samples")
    vocab = build_vocab([s.source for s in all_samples]
                        + [s.target for s in all_samples])

    torch.manual_seed(run.seed)
    model = TinySeq2Seq(run.model_config(len(vocab)))
    optimizer = torch.optim.AdamW(model.parameters(), lr=run.lr,
                                  weight_decay=run.weight_decay)

    losses: list[dict] = []
    for phase, samples in phases:
        encoded = [encode_sample(s, vocab, run.objective, run.max_len)
                   for s in samples]
        _phase_epochs(model, optimizer, encoded, run, phase, losses)

    manifest = {
        "run": asdict(run),
        "model": model.config.as_dict(),
        "optimizer": {"name": "adamw", "lr": run.lr,
                      "weight_decay": run.weight_decay},
        "files": {"phase1": phase1, "phase2": phase2},
        "n_samples": {name: len(samples) for name, samples in phases},
        "vocab_size": len(vocab),
        "losses": losses,
        "torch_version": str(torch.__version__),
    }
    model.eval()
    return Trained(model=model, vocab=vocab, manifest=manifest)


def evaluate_loss(trained: Trained, samples: list[Sample],
                  objective: str = "both", batch_size: int = 32) -> float:
    """Mean cross-entropy over every target token (full target, no
    objective mask); the objective only controls the source format."""
    model = trained.model
    model.eval()
    encoded = [encode_sample(s, trained.vocab, objective,
                             model.config.max_len) for s in samples]
    total, count = 0.0, 0
    with torch.no_grad():
        for chunk in batched(encoded, batch_size):
            batch = make_batch(chunk, pad_id=0)
            ce = _token_ce(model(batch.src, batch.src_pad, batch.tgt_in),
                           batch.labels)
            mask = ~batch.label_pad
            total += float(ce[mask].sum())
            count += int(mask.sum())
    if not count:
        raise ValueError("no target tokens to score")
    return total / count


def manifest_path_for(checkpoint_path: str) -> str:
    p = Path(checkpoint_path)
    return str(p.with_name(p.stem + ".manifest.json"))


def save_checkpoint(trained: Trained, path: str) -> str:
    """Write the checkpoint plus a sibling manifest JSON; returns the
    manifest path."""
    torch.save({
        "state_dict": trained.model.state_dict(),
        "model_config": trained.model.config.as_dict(),
        "vocab_tokens": list(trained.vocab.tokens),
        "manifest": trained.manifest,
    }, path)
    mpath = manifest_path_for(path)
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(trained.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return mpath


def load_checkpoint(path: str) -> Trained:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    config = ModelConfig(**payload["model_config"])
    model = TinySeq2Seq(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    vocab = Vocab(tokens=tuple(payload["vocab_tokens"]))
    return Trained(model=model, vocab=vocab, manifest=payload["manifest"])

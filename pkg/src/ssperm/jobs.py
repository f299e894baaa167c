"""Named jobs that all three parties can run from a session config.

A job is a dict (the ``job`` section of the config). Only P0 needs the data;
P1 and P2 derive every shape from the job description, so the same program
runs unchanged over in-process queues or TCP.

``{"kind": "infer", "arch": "10-4-relu-1-sigmoid", "batch": 8, "seed": 1}``
    random inputs and initial parameters from ``seed``; returns predictions.
``{"kind": "train", "arch": ..., "n": 200, "epochs": 2, "lr": 0.1, "batch": 32, "seed": 1}``
    synthetic two-class data; returns the accuracy history.
"""
from __future__ import annotations

import numpy as np

from . import nn
from . import protocols as P
from .data import split, two_gaussians
from .sharing import PartyId

P0 = PartyId.P0


def _infer(party, job: dict) -> dict | None:
    layers = nn.parse_arch(job["arch"])
    batch = int(job.get("batch", 8))
    seed = int(job.get("seed", 0))
    if batch < 1:
        raise ValueError("batch must be >= 1")
    holds = party.role == P0
    X = np.random.default_rng([seed, 1]).normal(size=(batch, layers[0].fan_in)) if holds else None
    params = nn.init_params(layers, seed) if holds else None
    net = nn.Network.share(party, layers, params)
    Xs = P.share_input(party, X, P0, (batch, layers[0].fan_in))
    pred = P.reveal_float(nn.nn_infer(Xs, net))
    if pred is None:
        return None
    out = {"predictions": pred.tolist()}
    if holds:
        out["reference"] = nn.FloatNetwork(layers, params).predict(X).tolist()
    return out


def _train(party, job: dict) -> dict | None:
    layers = nn.parse_arch(job["arch"])
    n = int(job.get("n", 200))
    seed = int(job.get("seed", 0))
    cfg = nn.TrainConfig(lr=float(job.get("lr", 0.1)), epochs=int(job.get("epochs", 1)),
                         batch_size=int(job.get("batch", 32)), seed=seed)
    d = layers[0].fan_in
    n_val = int(round(n * 0.2))
    if party.role == P0:
        Xt, Yt, Xv, Yv = split(*two_gaussians(n, d, seed), val_frac=0.2)
        shapes = None
    else:
        Xt = Yt = Xv = Yv = None
        shapes = ((n - n_val, d), (n - n_val, 1), (n_val, d), (n_val, 1))
    _, hist, _ = nn.train_shared(party, layers, cfg, Xt, Yt, Xv, Yv, shapes=shapes)
    if party.role != P0:
        return None
    return {"history": hist.rows()}


JOBS = {"infer": _infer, "train": _train}


def run_job(party, job: dict):
    kind = job.get("kind")
    if kind not in JOBS:
        raise ValueError(f"unknown job kind {kind!r}; expected one of {sorted(JOBS)}")
    return JOBS[kind](party, job)

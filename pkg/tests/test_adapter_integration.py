"""Optional cross-package checks against the model adapter.

The primary suite must pass with no adapter built, so everything here
skips when the adapter package is not importable. When it is present, the
core and the adapter are exercised strictly through their shared external
interfaces: the DGEM file format, the stdio logits protocol, and the
incipit-truncation subprocess contract.
"""

import importlib.util
import json
import sys

import numpy as np
import pytest

from divergauge.decoding import DecodeConfig, StdioProviderPair, generate_sequence
from divergauge.features import read_embeddings
from divergauge.harness.prompts import make_incipit

pytestmark = pytest.mark.skipif(
    importlib.util.find_spec("model_adapter") is None,
    reason="model_adapter package not installed",
)

ADAPTER = [sys.executable, "-m", "model_adapter"]


def test_adapter_dgem_readable_by_core(tmp_path):
    import subprocess

    payload = "".join(
        json.dumps({"id": f"s{i}", "text": f"sample text number {i}"}) + "\n" for i in range(5)
    )
    out = tmp_path / "x.dgem"
    proc = subprocess.run(
        ADAPTER + ["--embed", "--stub", "--dim", "24", "--out", str(out)],
        input=payload,
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    emb = read_embeddings(out)
    assert emb.ids == tuple(f"s{i}" for i in range(5))
    assert emb.d == 24


def test_generation_over_adapter_stub():
    with StdioProviderPair(ADAPTER + ["--serve", "--stub"]) as pair:
        cfg = DecodeConfig(truncation="nucleus", p=0.95, gamma=0.5, max_tokens=12, seed=4,
                           stop_tokens=pair.stop_tokens)
        a = generate_sequence(pair.instruct, pair.base, cfg, [2, 5], np.random.default_rng(4))
        b = generate_sequence(pair.instruct, pair.base, cfg, [2, 5], np.random.default_rng(4))
    assert a.tokens == b.tokens
    assert len(a.tokens) >= 1


def test_adapter_delegated_incipit_matches_count():
    text = "alpha beta gamma delta epsilon"
    got = make_incipit(
        text, n_tokens=4, mode="adapter-delegated",
        adapter_cmd=ADAPTER + ["--encoding", "simple"],
    )
    assert got == "alpha beta gamma delta"
    assert text.startswith(got)

"""Train the toy decoder on a handful of molecules and decode them back.

The model sees only fingerprint on-bits and must reproduce the canonical
SMILES. With a dozen molecules and a small network this takes well under a
minute on one CPU core. Run with ``python3 demos/memorize_and_decode.py``.
"""

from __future__ import annotations

import logging

from fp2mol.decoder import ToyTransformerParams, TrainConfig, beam_search, train
from fp2mol.evaluation import EvalConfig, evaluate_example
from fp2mol.fingerprint import DEFAULT_WIDTH, fingerprint_to_onbits, morgan_fingerprint
from fp2mol.smiles import parse_smiles, tokenize_smiles, write_smiles

MOLECULES = [
    "CC(=O)Oc1ccccc1C(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "CN1C=NC2=C1C(=O)N(C)C(=O)N2C",
    "CC(C)Cc1ccc(C(C)C(=O)O)cc1",
    "OC(=O)c1ccccc1O",
    "c1ccc2ccccc2c1",
    "CCN(CC)CC",
    "C1CCNCC1",
    "OCC(O)CO",
    "c1ccncc1",
    "CC(C)(C)O",
    "O=C(O)CCC(=O)O",
]


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    truths = [write_smiles(parse_smiles(s), canonical=True) for s in MOLECULES]
    bits = [fingerprint_to_onbits(morgan_fingerprint(parse_smiles(s))) for s in truths]
    corpus = [(b, tokenize_smiles(s)) for b, s in zip(bits, truths)]

    params = ToyTransformerParams(embed_dim=64, layers=2, heads=4, feedforward_dim=128)
    cfg = TrainConfig(learning_rate=1e-3, batch_size=4, epochs=150, seed=0, stop_loss=0.01)
    model = train(params, corpus, cfg, DEFAULT_WIDTH)
    print(f"\ntrained {len(model.loss_history) - 1} epochs, loss {model.loss_history[0]:.3f} -> {model.loss_history[-1]:.4f}\n")

    eval_cfg = EvalConfig(ks=(1, 5))
    for onbits, truth in zip(bits, truths):
        cands = beam_search(model, onbits, beam=5)
        res = evaluate_example(truth, cands, parse_smiles(truth), eval_cfg)
        best = cands[0]
        mark = "hit " if res.hits[1] else "miss"
        print(f"{mark} {truth:32s} -> {best.smiles:32s} logp {best.logprob:7.3f}  tanimoto@5 {res.tanimoto_best[5]:.2f}")


if __name__ == "__main__":
    main()

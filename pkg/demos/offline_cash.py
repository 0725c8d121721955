"""Two-stage CASH on the bundled toy flow table, through the library API.

Stage 1 scores each learner at its default config by 3-fold CV; stage 2
tunes the two leaders with TPE, starting from their defaults.

Run: python3 demos/offline_cash.py
"""

from pathlib import Path

from driftml.cash import Candidate, cash_optimize
from driftml.pipeline import SplitwiseModel
from driftml.preprocess import BalancePolicy, Imputer, ImputeMethod, ImputePolicy, fit_encoder
from driftml.stream import load_csv

DATA = Path(__file__).parent / "data" / "toy_flows.csv"


def main():
    d = load_csv(DATA, label_column="label")
    d = Imputer(ImputePolicy(ImputeMethod.parse("Mean"), categorical_method=ImputeMethod.parse("Mode"))).fit(d).transform(d)
    d = fit_encoder(d).transform(d)

    def wrap(model):
        # normalization and SMOTE are refitted inside every training fold
        return SplitwiseModel(model, "auto", BalancePolicy(seed=0))

    cands = [Candidate.from_registry(a, seed=0, wrap=wrap) for a in ("NB", "KNN", "CART")]
    res = cash_optimize(cands, d, cv_k=3, budget=8, optimizer="tpe", seed=0)
    print("stage 1 (default configs):")
    for row in res.stage1_rows():
        print(f"  {row['algorithm']:5s} acc {row['accuracy']:.3f}  f1 {row['f1']:.3f}")
    for alg, hist in res.stage2.items():
        print(f"stage 2 {alg}: {len(hist) - 1} trials, best loss {hist.best().loss:.4f} "
              f"(default {hist.trials[0].loss:.4f})")
    print(f"selected {res.algorithm} {res.config}  CV f1 {res.best.metrics['f1']:.3f}")


if __name__ == "__main__":
    main()

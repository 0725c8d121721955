"""A frozen batch tree against adaptive learners on a sudden-drift stream.

The concept switches from ``x0 > 0.5`` to ``x1 > 0.5`` halfway through.

Run: python3 demos/online_adaptation.py
"""

from driftml.drift import ADWIN
from driftml.evaluation import prequential_eval
from driftml.offline import cart_fit
from driftml.online import AdaptiveRandomForest, FrozenClassifier, HoeffdingTree
from driftml.stream import ConceptSpec, Condition, DriftKind, DriftStreamSpec, generate_stream, stream_to_dataset

SPEC = DriftStreamSpec(
    drift_kind=DriftKind.SUDDEN,
    concepts=(ConceptSpec((Condition(0, ">", 0.5),)), ConceptSpec((Condition(1, ">", 0.5),))),
    segment_length=5000, noise_rate=0.05, seed=1, n_features=4, n_instances=10_000,
)


def main():
    data = stream_to_dataset(generate_stream(SPEC))
    rows = list(data)
    learners = {
        "frozen CART": FrozenClassifier(cart_fit(data.subset(range(2000))), data.schema),
        "Hoeffding tree": HoeffdingTree(data.schema),
        "ARF": AdaptiveRandomForest(data.schema, n_models=10, seed=0),
    }
    for name, model in learners.items():
        if name != "frozen CART":
            for x in rows[:2000]:
                model.learn_one(x)
        trace = prequential_eval(rows[2000:], model, detectors={"ADWIN": ADWIN(0.002)}, start_index=2000)
        s = trace.summary()
        drifts = [e.index for e in trace.events if e.status == "Drift" and e.detector == "ADWIN"]
        print(f"{name:15s} acc {s['accuracy']:.3f}  f1 {s['f1']:.3f}  error-stream drifts at {drifts[:5]}")


if __name__ == "__main__":
    main()

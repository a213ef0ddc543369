"""Train the two-branch model on one split of a small synthetic dataset.

The graphs are corrected with HYPA scores, the split comes from the same plan
the benchmark uses, and the model state from the best validation epoch is
evaluated on the held-out fold. The implanted pattern is faint at this size,
so expect accuracy near chance here; see 05_clear_signal.py for data where the
classes are visible in the paths.
"""

import numpy as np

from hypadbgnn.debruijn import build_debruijn
from hypadbgnn.evaluation import balanced_accuracy, macro_metrics, make_split_plan
from hypadbgnn.neural import GraphInputs, ModelConfig, correct_graphs, forward, train
from hypadbgnn.pipeline import RunConfig, first_order_graph, load_dataset

config = RunConfig(synth="weighted", synth_paths=2**14, seed=3)
data = load_dataset(config)
first, higher = first_order_graph(data), build_debruijn(data.paths)
labels = data.classes.label_array(first.names)
print(f"{first.num_nodes} nodes, {higher.num_nodes} second-order nodes, {higher.num_edges} transitions")

plan = make_split_plan(labels, master_seed=config.seed)
train_mask, val_mask, test_mask = plan.repetitions[0].masks(len(labels))

for variant in ("hypa", "minus"):
    inputs = GraphInputs.build(correct_graphs(first, higher, variant), variant)
    model = ModelConfig(variant, h0=16, h1=16, lr=0.05, max_epochs=300, seed=1)
    state, trace = train(model, inputs, labels, train_mask, val_mask)
    pred = forward(state, inputs).argmax(axis=1)
    f1, prec, rec = macro_metrics(labels[test_mask], pred[test_mask])
    print(f"{variant:>6}: best epoch {trace.best_epoch}, val bacc {trace.best_val:.2f}, "
          f"test bacc {balanced_accuracy(labels[test_mask], pred[test_mask]):.2f}, "
          f"macro F1 {f1:.2f}")
    print("        final training loss", np.round(trace.loss[-1], 4))

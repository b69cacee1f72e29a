"""
Pretraining, the softmax head and fine-tuning
=============================================

Generate a small GA-labelled dataset, pretrain two sparse autoencoders,
put a softmax layer on top and fine-tune the stack end to end. Accuracy
is reported per decoded field, per sample and per bit, next to the
level of a predictor that outputs the same value everywhere.
"""

from dlrra import dnn
from dlrra.dataset import generate, split
from dlrra.netmodel import ScenarioConfig
from dlrra.solvers import GaConfig

cfg = ScenarioConfig(num_cells=3, subbands=2, users_per_cell=3, power_levels=(6.4, 19.2), max_power=40.0,
                     bits_per_field=2)

ds = generate(cfg, GaConfig(), 1500, seed=11)
train, test = split(ds, 0.8, seed=0)
print(f"{len(train)} training and {len(test)} test samples")

tc = dnn.TrainConfig(max_epochs=200)
hidden = dnn.default_hidden_dims(train.inputs.shape[1], 2)
encoders = dnn.pretrain_stack(train.inputs, hidden, tc)
codes, acts = dnn.forward(encoders, train.inputs)
# the sparsity penalty pulls each layer's mean activation towards 0.15
print("mean code activation per layer:", [round(float(a.mean()), 3) for a in acts[1:]])

head = dnn.train_softmax(codes, train.targets, tc)
stacked = dnn.NetParams([*encoders, head], cfg.fingerprint())
print("before fine-tuning:", dnn.evaluate(stacked, test))

net, history = dnn.fine_tune(stacked, train.inputs, train.targets, tc, return_history=True)
print(f"fine-tuning ran {len(history) - 1} epochs, loss {history[0]:.4f} -> {min(history):.4f}")
print("after fine-tuning: ", dnn.evaluate(net, test))
print("chance level:      ", dnn.evaluate_outputs(dnn.chance_outputs(test), test.targets, cfg.bits_per_field))

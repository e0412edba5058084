#!/usr/bin/env python3
"""Materialize the bundled handwritten-digits dataset as IDX containers and
emit ready-to-run config files pointing at them.

Usage: python scripts/make_digits_idx.py [out_dir]   (default: data/digits)

Writes images.idx / labels.idx plus two configs: digits_pair_svm.ini
(3-vs-5 binary run) and digits_mlp.ini (10-class run).
"""

import sys
from pathlib import Path

from sklearn.datasets import load_digits

from jd2p.datasets import RawDataset, write_idx

CONFIG_TEMPLATE = """\
[dataset]
kind = idx-files
train_images = {images}
train_labels = {labels}
test_fraction = {test_fraction}
subsample_train = none
subsample_test = none
{pair_line}seed = 0

[embedding]
features = 10

[rounds]
count = 10

[timing]
round_duration = 1.0
train_duration = 0.5

[channel]
shape = 2.0

[energy]
coefficient = 1e-17
order = 3
bits_per_feature = 8

[deepening]
classifier = {classifier}
moc = {moc}
p_th = 0.98
z_th = 0.03
strategy = 2
epochs = 10
batch_size = 64
learning_rate = {learning_rate}
train_seed = 3

[sim]
seed = 1
rho_mode = pilot
pilot_fraction = 0.25
benchmark = jd2p
prefetch = true

[experiment]
kind = {experiment}
p_th_values = 0.95,0.965,0.98,0.995
z_th_values = 0.01,0.03,0.05,0.07,0.09
num_seeds = 3
workers = 1
"""


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/digits")
    out_dir.mkdir(parents=True, exist_ok=True)
    digits = load_digits()
    raw = RawDataset(data=digits.data / 16.0, labels=digits.target.astype(int))
    images = out_dir / "images.idx"
    labels = out_dir / "labels.idx"
    write_idx(raw, images, labels, rows=8, cols=8)
    print(f"wrote {raw.num_samples} samples to {images} / {labels}")

    pair_config = out_dir / "digits_pair_svm.ini"
    pair_config.write_text(CONFIG_TEMPLATE.format(
        images=images, labels=labels, test_fraction=0.3,
        pair_line="class_pair = 3,5\n", classifier="svm", moc="svm-distance",
        learning_rate=0.01, experiment="tradeoff-sweep"))
    mlp_config = out_dir / "digits_mlp.ini"
    mlp_config.write_text(CONFIG_TEMPLATE.format(
        images=images, labels=labels, test_fraction=0.2,
        pair_line="", classifier="mlp", moc="posterior-gap",
        learning_rate=0.1, experiment="tradeoff-sweep"))
    print(f"wrote configs: {pair_config}, {mlp_config}")
    print("try: jd2p simulate --config", pair_config, "--out out/digits_pair")


if __name__ == "__main__":
    main()

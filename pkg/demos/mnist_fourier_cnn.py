"""
A Fourier-domain CNN with binary optical kernels
================================================

The conv layer is 16 binary Fourier masks applied to the input spectrum;
the camera records |.|^2 of each filtered image. A small electronic head
(batch-norm, max-pool, two dense layers) classifies the maps.

1. train on the ideal path,
2. evaluate the same weights through the simulated bench,
3. evaluate through a perturbed "hardware" bench,
4. refit FC1 on 5000 hardware/simulation feature pairs.

Run: python3 demos/mnist_fourier_cnn.py --data-dir ~/data/mnist [--epochs 10] [--test 2000]
"""
import argparse
import logging

from aofnn.datasets_io import load_mnist
from aofnn.fine_tune import collect_pairs, finetune_fc1
from aofnn.fourier_cnn import (FAST_PRESET, FourierCNN, TrainConfig, accuracy_from_features,
                               conv_features, train)
from aofnn.optics import calibrate_exposure, make_hardware_surrogate, nominal_config

parser = argparse.ArgumentParser()
parser.add_argument("--data-dir", default=None)
parser.add_argument("--epochs", type=int, default=10)
parser.add_argument("--test", type=int, default=2000, help="test images for the bench runs")
parser.add_argument("--checkpoint", help="reuse a saved model instead of training")
parser.add_argument("--surrogate-seed", type=int, default=0)
args = parser.parse_args()
logging.basicConfig(level=logging.INFO, format="%(message)s")

data = load_mnist(args.data_dir or "~/data/mnist")
if args.checkpoint:
    model, _ = FourierCNN.load(args.checkpoint)
else:
    model, _ = train(data, TrainConfig(epochs=args.epochs, **FAST_PRESET))
x, y = data.test_x[:args.test], data.test_y[:args.test]

ideal = accuracy_from_features(model, conv_features(model, x), y)
print(f"ideal path        {ideal:.4f}")

# The bench loses about 40 % of the light to mirror gaps, holes and the
# blazed tilt. One exposure scalar, fixed on a flat field, restores the
# intensity scale the batch-norm statistics were learned on.
bench = calibrate_exposure(nominal_config(subpixel_factor=2))
nominal = accuracy_from_features(model, conv_features(model, x, "physical", bench), y)
print(f"nominal bench     {nominal:.4f}")

hw = make_hardware_surrogate(bench, args.surrogate_seed)
hw_feats = conv_features(model, x, "physical", hw, seed=1)
before = accuracy_from_features(model, hw_feats, y)
print(f"hardware, as is   {before:.4f}")

# Pairs come from the training split only; FC2 stays frozen.
pairs = collect_pairs(model, None, hw, data, 5000)
tuned, losses = finetune_fc1(model, pairs)
after = accuracy_from_features(tuned, hw_feats, y)
print(f"hardware, tuned   {after:.4f}   (FC1 loss {losses[0]:.4f} -> {losses[-1]:.4f})")

import numpy as np

from imts_forge.generator import Dataset, ImtsInstance
from imts_forge.rng import CounterRng


def dataset_from_truth(truths, dropout=0.8, noise_std=0.05, seed=0, dt=0.01,
                       split_fraction=0.5):
    """Wrap ground-truth windows (list of W x C arrays) into a sparse noisy Dataset."""
    root = CounterRng(seed)
    instances = []
    for i, truth in enumerate(truths):
        truth = np.asarray(truth, dtype=np.float64)
        W, C = truth.shape
        rng = root.split(i)
        keep = rng.uniform(W * C) >= dropout
        noise = rng.normal(W * C) * noise_std
        idx = np.nonzero(keep)[0]
        instances.append(ImtsInstance(
            instance_id=i, onset_index=0, duration=dt * (W - 1), dt=dt, x0=(0.0,) * C,
            constants=(), ground_truth=truth, obs_step=idx // C, obs_channel=idx % C,
            obs_value=truth.reshape(-1)[idx] + noise[idx],
        ))
    flat = np.concatenate([np.asarray(t) for t in truths])
    metadata = {
        "channels": flat.shape[1],
        "normalization": [[float(m), float(s)] for m, s in zip(flat.mean(0), flat.std(0))],
        "split_fraction": split_fraction,
    }
    return Dataset(instances, metadata)

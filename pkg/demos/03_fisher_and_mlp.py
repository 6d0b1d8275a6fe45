"""
Fisher vectors and the MLP classifier
=====================================

Each video becomes one Fisher vector: gradients of a diagonal GMM's
log-likelihood with respect to its means and variances, power- and
L2-normalised. A one-hidden-layer perceptron then classifies the vectors.
"""

# %%
import numpy as np

from trajset import encode_fisher, fit_gmm, normalize, subsample
from trajset.mlp import TrainConfig, grad_check, init_model, predict, train

rng = np.random.default_rng(0)

# three toy "classes" of local features, 20 videos each
def video_features(cls):
    center = np.eye(3)[cls] * 1.5
    return center + rng.normal(size=(int(rng.integers(80, 120)), 3))

videos = [(video_features(c), c) for c in range(3) for _ in range(20)]
pool = np.concatenate([v for v, _ in videos])
print(pool.shape, "features in total")

# %%
# The codebook sees only a random sample of the pool.
sample = subsample(pool, 0.25, seed=0)
gmm = fit_gmm(sample, n_components=4, seed=0)
ll = gmm.log_likelihood
print(f"EM ran {len(ll) - 1} iterations, mean log-likelihood {ll[0]:.4f} -> {ll[-1]:.4f}")

# %%
fvs = np.stack([normalize(encode_fisher(v, gmm)).values for v, _ in videos])
labels = [str(c) for _, c in videos]
print("FV length", fvs.shape[1], "norms", np.linalg.norm(fvs, axis=1)[:3])

# %%
model = train(fvs[::2], labels[::2], TrainConfig(epochs=200), hidden_dim=16)
pred = np.argmax(predict(model, fvs[1::2]), axis=1)
acc = np.mean([model.labels[i] == y for i, y in zip(pred, labels[1::2])])
print("held-out accuracy", acc, "final train loss", round(model.final_train_loss, 4))

# %%
# Backprop against central differences on a fresh small model.
small = init_model(20, 3, 7, seed=1)
print("max relative gradient error", grad_check(small, rng.normal(size=(8, 20)), rng.integers(0, 3, 8)))

"""Calibration: conditional fidelity of the desk-scale cGAN vs steps."""
import time

import numpy as np
import torch
import torch.nn as nn

from gemix import cgan, classifier, evaluation, shapes
from gemix.sampling import substream

t0 = time.time()
seed = 0
K, size, per_class = 3, 32, 1000

gan_pool = shapes.make_shape_samples(K, per_class, size, substream(seed, "data:gan"))
clf_pool = shapes.make_shape_samples(K, per_class, size, substream(seed, "data:clf"))
from gemix.data import split_train_val, label_class
split = split_train_val(clf_pool, 0.8, substream(seed, "split"))
print(f"data ready {time.time()-t0:.1f}s")

ccfg = classifier.ClassifierConfig(num_classes=K, image_size=size, epochs=5, seed=seed)
oracle = classifier.train_classifier(split.train, ccfg, val=split.val)
val_imgs = np.stack([s.image for s in split.val])
val_true = [label_class(s) for s in split.val]
cm = evaluation.confusion_matrix(classifier.predict(oracle, val_imgs), val_true)
acc = np.trace(cm) / cm.sum()
print(f"oracle val acc: {acc:.4f}  ({time.time()-t0:.1f}s)")

# inline training loop == train_cgan but with fidelity probes
cfg = cgan.GanConfig(image_size=size, num_classes=K, steps=6000, seed=seed)
torch.set_num_threads(1)
real_x, real_y = cgan._dataset_tensors(gan_pool, cfg)
n = len(gan_pool)
torch.manual_seed(cfg.seed)
G = cgan._Generator(cfg)
D = cgan._Discriminator(cfg)
opt_g = torch.optim.Adam(G.parameters(), lr=cfg.lr_g, betas=(0.5, 0.999))
opt_d = torch.optim.Adam(D.parameters(), lr=cfg.lr_d, betas=(0.5, 0.999))
bce = nn.BCEWithLogitsLoss()
batch_rng, latent_rng, class_rng = (np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(k,))) for k in range(3))
eye = torch.eye(K)
ones = torch.ones(cfg.batch_size, 1)
zeros = torch.zeros(cfg.batch_size, 1)


def fidelity(n_per_class=150):
    G.eval()
    zrng = np.random.default_rng(123)
    imgs, want = [], []
    with torch.no_grad():
        for c in range(K):
            for _ in range(n_per_class):
                z = torch.from_numpy(zrng.standard_normal((1, cfg.latent_dim)).astype(np.float32))
                out = G(z, eye[c][None])[0]
                imgs.append(((out + 1) / 2).clamp(0, 1).numpy().transpose(1, 2, 0))
                want.append(c)
    G.train()
    probs = classifier.predict(oracle, np.stack(imgs))
    return float((np.argmax(probs, 1) == np.array(want)).mean())


for step in range(cfg.steps):
    idx = torch.from_numpy(batch_rng.integers(0, n, size=cfg.batch_size))
    z = torch.from_numpy(latent_rng.standard_normal((cfg.batch_size, cfg.latent_dim)).astype(np.float32))
    fake_y = eye[class_rng.integers(0, K, size=cfg.batch_size)]
    fake = G(z, fake_y)
    opt_d.zero_grad()
    d_loss = bce(D(real_x[idx], real_y[idx]), ones) + bce(D(fake.detach(), fake_y), zeros)
    d_loss.backward()
    opt_d.step()
    opt_g.zero_grad()
    g_loss = bce(D(fake, fake_y), ones)
    g_loss.backward()
    opt_g.step()
    if (step + 1) % 500 == 0:
        fid = fidelity()
        print(f"step {step+1:5d}  d={float(d_loss):.3f} g={float(g_loss):.3f} "
              f"fidelity={fid:.3f}  ({time.time()-t0:.0f}s)")

"""Pure-numpy conv kernels (im2col) — the fallback backend."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_forward(x, w):
    """Valid cross-correlation: x (N,C,H,W), w (F,C,kh,kw) -> (N,F,oh,ow)."""
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    cols = sliding_window_view(x, (kh, kw), axis=(2, 3))  # (N,C,oh,ow,kh,kw)
    out = np.einsum("ncijkl,fckl->nfij", cols, w, optimize=True)
    return np.ascontiguousarray(out)


def conv2d_backward(x, w, gout):
    """Gradients of conv2d_forward w.r.t. input and kernel."""
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    cols = sliding_window_view(x, (kh, kw), axis=(2, 3))
    gw = np.einsum("ncijkl,nfij->fckl", cols, gout, optimize=True)
    # full correlation of gout with the flipped kernel
    oh, ow = gout.shape[2], gout.shape[3]
    gpad = np.zeros((n, f, oh + 2 * (kh - 1), ow + 2 * (kw - 1)))
    gpad[:, :, kh - 1:kh - 1 + oh, kw - 1:kw - 1 + ow] = gout
    gcols = sliding_window_view(gpad, (kh, kw), axis=(2, 3))
    wflip = w[:, :, ::-1, ::-1]
    gx = np.einsum("nfijkl,fckl->ncij", gcols, wflip, optimize=True)
    return np.ascontiguousarray(gx), np.ascontiguousarray(gw)

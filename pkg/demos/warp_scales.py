"""
Warped frequency scales and their filterbanks
=============================================

The warp ``f' = c1 * log10(1 + f / c2)`` is the Mel scale for
``(c1, c2) = (2595, 700)``. At seismic sampling rates the interesting
choice is a small ``c2``, which moves filters from the upper band down to
the lowest few hertz.
"""

import numpy as np

from seiswarp import FrequencyScale, StftConfig, build_filterbank, hz_to_warped
from seiswarp.errors import DegenerateFilterbankError

# The Mel scale at 700 Hz is c1 * log10(2)
print("mel(700 Hz) =", hz_to_warped(700.0))

# At 100 Hz sampling the Nyquist frequency is 50 Hz, so the Mel scale is
# almost linear over the whole band: 50 Hz is far below c2 = 700 Hz.
cfg = StftConfig(n_fft=256, hop=64)
rate = 100.0
scales = {
    "linear": FrequencyScale.linear(),
    "mel": FrequencyScale.mel(),
    "warped c2=3": FrequencyScale.warped(2595.0, 3.0),
}
for name, scale in scales.items():
    fb = build_filterbank(scale, 24, cfg, rate)
    below_2hz = int(np.sum(fb.centers_hz < 2.0))
    print(f"{name:>12}: first centres {np.round(fb.centers_hz[:4], 2)} Hz, "
          f"{below_2hz} of 24 filters centred below 2 Hz")

# c1 only stretches the warped axis; the break frequencies depend on c2 alone
a = build_filterbank(FrequencyScale.warped(100.0, 3.0), 24, cfg, rate)
b = build_filterbank(FrequencyScale.warped(9000.0, 3.0), 24, cfg, rate)
print("same filterbank for c1=100 and c1=9000:", np.allclose(a.weights, b.weights))

# Push c2 too low and the lowest triangles become narrower than one FFT bin
# (0.39 Hz here). Such a filterbank is rejected rather than silently
# producing empty channels.
try:
    build_filterbank(FrequencyScale.warped(2595.0, 0.2), 24, cfg, rate)
except DegenerateFilterbankError as exc:
    print("rejected:", exc)

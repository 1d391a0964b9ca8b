"""sepkit: desk-scale single-channel speech separation toolkit.

Subsystems:
  tensor     reverse-mode autodiff core on numpy arrays
  kernels    compiled/pure hot kernels (CTC recursion, depthwise conv)
  dsp        STFT analysis/synthesis, mel features, normalization, WAV I/O
  simulate   room-impulse-response + mixture corpus generator
  separator  conformer mask-estimation network
  asr        toy encoder-decoder recognizer with a CTC branch
  losses     separation objectives (PIT, teacher-student, objective shifting)
  trainer    AdamW, schedules, gradient accumulation, stage orchestration
  css        chunked continuous separation with stream stitching
  evalkit    WER / SI-SDR metrics and report generation
  cli        command-line entry points
"""

__version__ = "0.1.0"

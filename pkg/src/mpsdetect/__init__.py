"""Detection of sperm-whale echolocation clicks in fixed-length audio buffers.

The detector scores each buffer by the stability of the multi-pulse
structure (MPS) of its transients: transients are enhanced with the
Teager-Kaiser energy operator, the delay between the two strongest
pulses of each transient is measured, and a constrained clustering of
those delays yields a utility value that is thresholded into a
noise/signal decision.

Subpackages and modules mirror the processing stages: :mod:`ingest`,
:mod:`dsp`, :mod:`roi`, :mod:`mps`, :mod:`cluster`, :mod:`verify`,
:mod:`decide`, :mod:`evaluate`, plus :mod:`config` and :mod:`cli`.
"""

__version__ = "0.1.0"

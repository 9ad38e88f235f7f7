"""WiFi-CSI human activity recognition pipeline.

Subpackages/modules:
  core     - domain types and amplitude/phase math
  ingest   - bit-exact .dat capture reader/writer and label sidecars
  dsp      - median/mean/Butterworth denoising chain
  segment  - time segmentation, sample averaging, augmentation, splits
  sim      - physics-based CSI scenario simulator and skeleton ground truth
  svm      - RBF multiclass SVM trained by sequential minimal optimization
  nn       - from-scratch tensor ops, residual CNN, and the WiNN branch
  metrics  - confusion matrices and accuracy summaries
  pipeline - stage orchestration used by the CLI
  cli      - the `wivihar` command
"""

__version__ = "0.1.0"

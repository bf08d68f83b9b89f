"""riskbridge: explainable vulnerability prioritization.

Fuses NVD severity, EPSS exploit probability, and the CISA KEV catalog
into ZDES/BII scores, compiles compliance profiles into SLA deadlines with
audit traces, and selects ROI-optimal patch bundles via budgeted weighted
set cover.
"""

__version__ = "0.1.0"

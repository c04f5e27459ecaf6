"""Interactive diagnostic-dialogue engine with guideline-grounded question
selection and a patient-simulator benchmark harness."""

__version__ = "0.1.0"

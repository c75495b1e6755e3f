"""Free-floating multibody simulator for handrail perching with compliant grippers."""

__version__ = "0.1.0"

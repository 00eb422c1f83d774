"""tosguard: local-first review of Terms of Service for abusive clauses.

A two-stage pipeline (linear detection filter, then retrieval-augmented
classification over an annotated knowledge base) plus the evaluation
and meta-analysis tooling used to pick retrieval configurations.
"""

__version__ = "0.1.0"

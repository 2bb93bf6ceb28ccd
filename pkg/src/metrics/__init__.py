"""Wasserstein-1 evaluation, invariance statistics, contraction and sweep checks, and the error ledger."""

"""Test entrypoint for the Django app.

We use pytest with tests located under selection/tests/.
This module is intentionally left empty to avoid duplicate discovery by unittest.
"""

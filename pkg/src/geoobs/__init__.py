"""Obstacle geodesics around analytic graph surfaces."""

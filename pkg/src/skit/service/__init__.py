"""HTTP service exposing the sequential test."""

"""Beam model, generating functions, jets, flat synthesis and the FD simulator."""

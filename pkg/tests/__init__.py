"""Test suite for FairGuide."""

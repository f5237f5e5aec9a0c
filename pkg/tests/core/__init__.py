"""Core module tests."""
"""Workflow tests."""
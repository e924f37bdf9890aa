"""Shared factories for the test suite."""

import pytest

from atcpip.terms import LicenseTerms


def make_terms(**overrides):
    return LicenseTerms(**overrides)


@pytest.fixture
def terms():
    return make_terms()

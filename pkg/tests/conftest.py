from pathlib import Path

import pytest

from circlemethod.forms import FormSystem, IntegerForm

FIXTURES = Path(__file__).parent / "fixtures"


def make_system(n, forms, **kw) -> FormSystem:
    return FormSystem(n, tuple(forms), **kw)


def linear_system(**kw) -> FormSystem:
    return make_system(2, [IntegerForm(2, 1, {(1, 0): 1, (0, 1): -1})], **kw)


def quadric_system() -> FormSystem:
    return make_system(5, [IntegerForm.diagonal([1, 1, 1, -1, -1], 2)])


@pytest.fixture
def linear():
    return linear_system()


@pytest.fixture
def quadric():
    return quadric_system()


@pytest.fixture
def fixtures_dir():
    return FIXTURES

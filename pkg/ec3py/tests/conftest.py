import pytest


def pytest_addoption(parser):
    parser.addoption("--full_scale", action='store_true',
                     help="If true, run the full-size reproductions (100 "
                          "seeds, long horizons). Default: False, which "
                          "runs reduced seeds and horizons.")


@pytest.fixture()
def full_scale(request):
    return request.config.getoption('--full_scale')

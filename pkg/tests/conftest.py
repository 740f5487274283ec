import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hardneg.mockserver import MockProviderServer


@pytest.fixture
def mock_server():
    """Fresh default (content-keyed deterministic) mock provider per test."""
    with MockProviderServer() as server:
        yield server


@pytest.fixture
def scripted_server():
    """Factory for servers with a fixed chat reply sequence."""
    servers = []

    def make(chat_script, **kwargs):
        server = MockProviderServer(chat_script=chat_script, **kwargs).start()
        servers.append(server)
        return server

    yield make
    for server in servers:
        server.stop()

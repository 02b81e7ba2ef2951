import pytest

import linkbound as lb


@pytest.fixture(scope="session")
def operating_channel():
    """Channel at the standard operating point: 25 dB gain, 8 dB shadowing."""
    return lb.ShadowingChannel(
        mean_snr_db=25.0, sigma_db=8.0, bandwidth_hz=500e6, slot_seconds=1.0
    )


@pytest.fixture(scope="session")
def gbps_env():
    """Constant-rate 1 Gbps flow with no burst, in bits per 1 s slot."""
    return lb.AffineEnvelope(burst_bits=0.0, rate_bits_per_slot=1e9)


@pytest.fixture(scope="session")
def operating_svc(operating_channel):
    return lb.ServiceCharacterization(operating_channel)

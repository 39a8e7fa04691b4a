import pytest

from hsrsched import RadioConfig, ServiceSpec, TrajectoryConfig


@pytest.fixture(scope="session")
def table1_traj():
    return TrajectoryConfig(
        speed=100.0,
        cell_radius=1500.0,
        track_offset=30.0,
        trip_duration=30.0,
        frame_length=1e-3,
    )


@pytest.fixture(scope="session")
def table1_radio():
    return RadioConfig(
        carrier_freq=2.4e9,
        bs_antenna_height=50.0,
        rs_antenna_height=5.0,
        tx_power_over_noise=115.0,
        bandwidth=1.0e7,
        packet_size=500.0,
    )


@pytest.fixture(scope="session")
def two_services():
    return (
        ServiceSpec(service_id=1, arrival_rate=100.0, deadline=10, delivery_ratio=0.99),
        ServiceSpec(service_id=2, arrival_rate=60.0, deadline=10, delivery_ratio=0.90),
    )

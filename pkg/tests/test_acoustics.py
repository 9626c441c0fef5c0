import numpy as np
import pytest

from marsim import acoustics as ac
from marsim.errors import ClockRegression


def params(**kw):
    base = dict(
        sound_speed=1500.0, max_range=2000.0, bitrate=1000.0,
        loss_exponent=2.0, energy_per_byte=1.0,
    )
    base.update(kw)
    return ac.ChannelParams(**base)


def msg(src="a", dst="c2", size=10, t=0.0):
    return ac.AcousticMessage(src, dst, b"x" * size, t)


P0 = np.zeros(3)


class TestTransmit:
    def test_propagation_delay_exact(self):
        ch = ac.AcousticChannel(params(loss_exponent=50.0), seed=1)  # ~lossless short range
        out = ch.transmit(msg(size=1), P0, {"c2": np.array([1500.0, 0, 0])})
        assert len(out) == 1
        d = out[0]
        assert not d.dropped
        # 8 bits / 1000 bps + 1500 m / 1500 m/s
        assert d.deliver_time == pytest.approx(0.008 + 1.0, abs=1e-12)

    def test_queueing_delay_125_bytes(self):
        ch = ac.AcousticChannel(params(loss_exponent=50.0), seed=1)
        out = ch.transmit(msg(size=125), P0, {"c2": np.array([150.0, 0, 0])})
        assert out[0].deliver_time == pytest.approx(1.0 + 0.1, abs=1e-12)

    def test_modem_serializes_transmissions(self):
        ch = ac.AcousticChannel(params(loss_exponent=50.0), seed=1)
        ch.transmit(msg(size=125, t=0.0), P0, {"c2": np.array([150.0, 0, 0])})
        out = ch.transmit(msg(size=125, t=0.5), P0, {"c2": np.array([150.0, 0, 0])})
        # modem busy until t=1.0, second tx starts there
        assert out[0].deliver_time == pytest.approx(1.0 + 1.0 + 0.1, abs=1e-12)
        assert ch.busy_report()["a"] == pytest.approx(2.0)

    def test_out_of_range_always_dropped(self):
        ch = ac.AcousticChannel(params(), seed=1)
        out = ch.transmit(msg(), P0, {"c2": np.array([2500.0, 0, 0])})
        assert out[0].dropped and out[0].drop_reason == "out_of_range"

    def test_loss_probability_curve(self):
        p = params(loss_exponent=2.0)
        assert p.loss_probability(0.0) == 0.0
        assert p.loss_probability(1000.0) == pytest.approx(0.25)
        assert p.loss_probability(2000.0) == 1.0
        assert p.loss_probability(5000.0) == 1.0

    def test_drop_pattern_deterministic(self):
        def pattern(seed):
            ch = ac.AcousticChannel(params(), seed=seed)
            drops = []
            for k in range(200):
                out = ch.transmit(
                    msg(size=4, t=k * 10.0), P0, {"c2": np.array([1400.0, 0, 0])}
                )
                drops.append(out[0].dropped)
            return drops

        assert pattern(5) == pattern(5)
        assert pattern(5) != pattern(6)

    def test_empirical_drop_rate(self):
        ch = ac.AcousticChannel(params(loss_exponent=2.0), seed=9)
        n = 4000
        drops = 0
        for k in range(n):
            out = ch.transmit(
                msg(size=1, t=float(k)), P0, {"c2": np.array([1000.0, 0, 0])}
            )
            drops += out[0].dropped
        assert drops / n == pytest.approx(0.25, abs=0.03)


class TestPoll:
    def test_empty(self):
        ch = ac.AcousticChannel(params(), seed=1)
        assert ch.poll_deliveries(10.0) == []

    def test_not_due_yet(self):
        ch = ac.AcousticChannel(params(loss_exponent=50.0), seed=1)
        ch.transmit(msg(size=1), P0, {"c2": np.array([1500.0, 0, 0])})
        assert ch.poll_deliveries(0.5) == []
        due = ch.poll_deliveries(1.2)
        assert len(due) == 1

    def test_tie_break_by_src_then_seq(self):
        ch = ac.AcousticChannel(params(loss_exponent=50.0), seed=1)
        pos = {"c2": np.array([150.0, 0, 0])}
        ch.transmit(msg(src="b", size=1), P0, pos)
        ch.transmit(msg(src="a", size=1), P0, pos)
        due = ch.poll_deliveries(5.0)
        assert [d.message.src for d in due] == ["a", "b"]

    def test_clock_regression(self):
        ch = ac.AcousticChannel(params(), seed=1)
        ch.poll_deliveries(5.0)
        with pytest.raises(ClockRegression):
            ch.poll_deliveries(4.0)


class TestEnergy:
    def test_no_transmissions(self):
        ch = ac.AcousticChannel(params(), seed=1)
        assert ch.energy_report() == {}

    def test_additive(self):
        ch = ac.AcousticChannel(params(energy_per_byte=1.0), seed=1)
        pos = {"c2": np.array([100.0, 0, 0])}
        ch.transmit(msg(size=100), P0, pos)
        ch.transmit(msg(size=100, t=2.0), P0, pos)
        assert ch.energy_report()["a"] == pytest.approx(200.0)

    def test_broadcast_charged_once(self):
        ch = ac.AcousticChannel(params(energy_per_byte=1.0), seed=1)
        dsts = {f"v{i}": np.array([50.0 * i, 0, 0]) for i in range(1, 5)}
        ch.transmit(msg(size=100, dst=ac.BROADCAST), P0, dsts)
        assert ch.energy_report()["a"] == pytest.approx(100.0)

    def test_charged_even_when_dropped(self):
        ch = ac.AcousticChannel(params(energy_per_byte=1.0), seed=1)
        ch.transmit(msg(size=10), P0, {"c2": np.array([9999.0, 0, 0])})
        assert ch.energy_report()["a"] == pytest.approx(10.0)

"""Smoke test for the wsnsim_py extension.

Build and install first:
    pip install maturin
    maturin develop -m crates/python/Cargo.toml
"""

import math
from pathlib import Path

import wsnsim_py as w

ROOT = Path(__file__).resolve().parent.parent


def main():
    cfg = w.PacketConfig(5, 1, 2_000_000)
    assert cfg.overhead_bits() == 65
    assert cfg.frame_bits(1) == 73

    bits = w.serialize(bytes([0xE7] * 5), bytes([0x42]), pid=2)
    assert len(bits) == 73 and bits.startswith("10101010")
    address, payload, pid, no_ack = w.deserialize(bits)
    assert (bytes(address), bytes(payload), pid, no_ack) == (bytes([0xE7] * 5), b"\x42", 2, False)

    flipped = bits[:40] + ("0" if bits[40] == "1" else "1") + bits[41:]
    try:
        w.deserialize(flipped)
        raise AssertionError("corrupted frame decoded")
    except w.WsnsimError:
        pass

    ascii_bits = "".join(f"{b:08b}" for b in b"123456789")
    assert w.compute_crc(ascii_bits, 2) == 0x29B1

    assert abs(w.free_space_loss_db(1.0) - 40.052) < 1e-3
    assert abs(w.per_from_ber(1e-3, 73) - 0.0704331) < 1e-6
    assert abs(w.ber_from_per(0.001, 73) - 1.3706e-5) < 1e-9
    assert math.isfinite(w.link_margin_db(10.0))

    i_avg, (hours, days, years) = w.battery_lifetime()
    assert abs(i_avg - 0.06342619) < 1e-8
    assert abs(hours - 38627.5768) < 1e-3
    low, _ = w.battery_lifetime(mcu_tx_ma=8.0)
    assert low < i_avg

    assert w.apply_command("PowerDown", "SetPwrUp") == ("StandbyI", 0.0015)

    tables, summary = w.run_experiment((ROOT / "configs" / "default.toml").read_text())
    assert tables["per"].splitlines()[0].startswith("n_packets,range_m")
    assert "PER sweep" in summary

    delivered, nodes = w.simulate_star(6, 20, 0.0, seed=1)
    assert delivered == 120 and all(acked == 20 for acked, _, _ in nodes)

    print("wsnsim_py smoke test passed")


if __name__ == "__main__":
    main()

import numpy as np
import pytest

from sepkit import dsp
from sepkit import tensor as dt
from sepkit.errors import DataIOError, DimensionError, InputError

CFG = dsp.StftConfig()


def tone(freq, seconds=1.0, rate=dsp.SAMPLE_RATE, amp=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return amp * np.sin(2 * np.pi * freq * t)


class TestStft:
    def test_zero_in_zero_out(self):
        spec = dsp.stft(np.zeros(16000), CFG)
        assert spec.shape == (dsp.num_frames(16000, CFG), 257)
        np.testing.assert_array_equal(np.abs(spec), 0.0)

    def test_constant_signal_matches_window_spectrum(self):
        spec = dsp.stft(np.ones(4000), CFG)
        win_spec = np.fft.rfft(dsp.hamming_window(CFG.frame_length), n=CFG.fft_size)
        # every fully interior frame sees the same constant content
        np.testing.assert_allclose(np.abs(spec[3]), np.abs(win_spec), atol=1e-9)
        assert np.abs(spec[3, 0]) == pytest.approx(dsp.hamming_window(400).sum())

    def test_sinusoid_peaks_at_mapped_bin(self):
        spec = dsp.stft(tone(1000.0), CFG)
        peak = int(np.abs(spec[10]).argmax())
        assert peak == round(1000 * CFG.fft_size / dsp.SAMPLE_RATE) == 32

    def test_too_short_audio_rejected(self):
        with pytest.raises(InputError):
            dsp.stft(np.zeros(CFG.frame_length - 1), CFG)

    def test_frame_count(self):
        n = 4321
        spec = dsp.stft(np.zeros(n), CFG)
        assert spec.shape[0] == 1 + (n - CFG.frame_length) // CFG.hop

    def test_energy_scales_quadratically(self, rng):
        x = rng.normal(size=8000)
        e1 = np.sum(np.abs(dsp.stft(x, CFG)) ** 2)
        e3 = np.sum(np.abs(dsp.stft(3.0 * x, CFG)) ** 2)
        assert e3 == pytest.approx(9.0 * e1, rel=1e-9)


class TestIstft:
    def test_round_trip(self, rng):
        x = rng.normal(size=16000) * 0.3
        y = dsp.istft(dsp.stft(x, CFG), CFG)
        assert np.max(np.abs(x[:y.size] - y)) < 1e-6

    def test_unit_mask_reproduces_mixture(self, rng):
        x = rng.normal(size=8000) * 0.3
        spec = dsp.stft(x, CFG)
        y = dsp.istft(dsp.apply_mask(spec, np.ones(spec.shape)), CFG)
        assert np.max(np.abs(x[:y.size] - y)) < 1e-6

    def test_zero_spectrogram_gives_silence(self):
        out = dsp.istft(np.zeros((20, 257), dtype=complex), CFG)
        np.testing.assert_array_equal(out, 0.0)

    def test_overlong_request_rejected(self):
        spec = np.zeros((20, 257), dtype=complex)
        span = 19 * CFG.hop + CFG.frame_length
        with pytest.raises(InputError):
            dsp.istft(spec, CFG, length=span + 1)


class TestApplyMask:
    def test_unit_and_zero_masks(self, rng):
        spec = dsp.stft(rng.normal(size=8000), CFG)
        np.testing.assert_array_equal(dsp.apply_mask(spec, np.ones(spec.shape)), spec)
        np.testing.assert_array_equal(
            dsp.apply_mask(spec, np.zeros(spec.shape)), np.zeros_like(spec))

    def test_half_mask_scales_magnitude_not_phase(self, rng):
        spec = dsp.stft(rng.normal(size=8000), CFG)
        out = dsp.apply_mask(spec, np.full(spec.shape, 0.5))
        np.testing.assert_allclose(np.abs(out), 0.5 * np.abs(spec))
        nz = np.abs(spec) > 1e-12
        np.testing.assert_allclose(np.angle(out[nz]), np.angle(spec[nz]))

    def test_shape_mismatch(self, rng):
        spec = dsp.stft(rng.normal(size=8000), CFG)
        with pytest.raises(DimensionError):
            dsp.apply_mask(spec, np.ones((3, 3)))


class TestMel:
    def test_matrix_coverage(self):
        mel = dsp.mel_matrix(80, CFG)
        assert mel.matrix.shape == (80, 257)
        assert (mel.matrix >= 0).all()
        assert (mel.matrix.sum(axis=1) > 0).all(), "every filter sees some bin"
        inner = mel.matrix.sum(axis=0)[1:-1]
        assert (inner > 0).all(), "every interior bin is covered"

    def test_zero_magnitudes_zero_features(self):
        mel = dsp.mel_matrix(80, CFG)
        np.testing.assert_array_equal(
            dsp.feature_transform(np.zeros((5, 257)), mel), np.zeros((5, 80)))

    def test_identity_transform(self, rng):
        eye = dsp.MelTransform(matrix=np.eye(257))
        mag = np.abs(rng.normal(size=(4, 257)))
        np.testing.assert_array_equal(dsp.feature_transform(mag, eye), mag)

    def test_impulse_selects_matrix_column(self):
        mel = dsp.mel_matrix(80, CFG)
        mag = np.zeros((1, 257))
        mag[0, 100] = 1.0
        np.testing.assert_allclose(dsp.feature_transform(mag, mel)[0],
                                   mel.matrix[:, 100])

    def test_linearity(self, rng):
        mel = dsp.mel_matrix(80, CFG)
        x = np.abs(rng.normal(size=(6, 257)))
        z = np.abs(rng.normal(size=(6, 257)))
        lhs = dsp.feature_transform(2.5 * x - 1.25 * z, mel)
        rhs = 2.5 * dsp.feature_transform(x, mel) - 1.25 * dsp.feature_transform(z, mel)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_shape_mismatch(self):
        mel = dsp.mel_matrix(80, CFG)
        with pytest.raises(DimensionError):
            dsp.feature_transform(np.zeros((5, 100)), mel)

    def test_tensor_path_matches_numpy(self, rng):
        mel = dsp.mel_matrix(80, CFG)
        mag = np.abs(rng.normal(size=(6, 257)))
        out = dsp.feature_transform(dt.astensor(mag), mel)
        np.testing.assert_allclose(out.data, dsp.feature_transform(mag, mel))


class TestLogMvn:
    def test_standardized_per_frequency(self, rng):
        mag = np.abs(rng.normal(size=(50, 17))) + 0.1
        out = dsp.log_mvn(mag)
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-6)
        np.testing.assert_allclose(out.var(axis=0), 1.0, atol=1e-6)

    def test_constant_utterance_maps_to_zero(self):
        out = dsp.log_mvn(np.full((30, 5), 0.7))
        np.testing.assert_allclose(out, 0.0, atol=1e-9)

    def test_amplitude_invariance(self, rng):
        x = tone(700.0, seconds=0.5) + 0.01 * rng.normal(size=8000)
        a = dsp.log_mvn(np.abs(dsp.stft(x, CFG)))
        b = dsp.log_mvn(np.abs(dsp.stft(10.0 * x, CFG)))
        assert np.max(np.abs(a - b)) < 1e-6

    def test_tensor_path_matches_numpy(self, rng):
        mag = np.abs(rng.normal(size=(20, 9))) + 0.05
        out = dsp.log_mvn(dt.astensor(mag))
        np.testing.assert_allclose(out.data, dsp.log_mvn(mag))


class TestIdealAmplitudeMask:
    def test_oracle_mask_beats_unit_mask(self, rng):
        a = tone(500.0, 0.6)
        b = tone(1900.0, 0.6)
        mix = a + b
        mix_mag = np.abs(dsp.stft(mix, CFG))
        ref_mag = np.abs(dsp.stft(a, CFG))
        iam = dsp.ideal_amplitude_mask(ref_mag, mix_mag)
        assert (iam >= 0).all() and (iam <= 1).all()
        err_iam = np.linalg.norm(iam * mix_mag - ref_mag)
        err_unit = np.linalg.norm(mix_mag - ref_mag)
        assert err_iam < err_unit


class TestWavIO:
    def test_round_trip(self, tmp_path, rng):
        x = np.clip(rng.normal(size=16000) * 0.2, -0.9, 0.9)
        p = tmp_path / "a.wav"
        dsp.write_wav(p, x)
        y = dsp.read_wav(p)
        assert y.shape == x.shape
        assert np.max(np.abs(x - y)) < 1.0 / 32768.0

    def test_rejects_wrong_rate(self, tmp_path):
        import wave
        p = tmp_path / "bad.wav"
        with wave.open(str(p), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(8000)
            w.writeframes(b"\x00\x00" * 100)
        with pytest.raises(DataIOError, match="8000"):
            dsp.read_wav(p)

    def test_rejects_stereo(self, tmp_path):
        import wave
        p = tmp_path / "st.wav"
        with wave.open(str(p), "wb") as w:
            w.setnchannels(2)
            w.setsampwidth(2)
            w.setframerate(16000)
            w.writeframes(b"\x00\x00\x00\x00" * 100)
        with pytest.raises(DataIOError, match="mono"):
            dsp.read_wav(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataIOError, match="missing"):
            dsp.read_wav(tmp_path / "nope.wav")


class TestStftConfig:
    def test_bins(self):
        assert CFG.bins == 257

    def test_validation(self):
        with pytest.raises(InputError):
            dsp.StftConfig(frame_length=600, hop=160, fft_size=512)
        with pytest.raises(InputError):
            dsp.StftConfig(frame_length=400, hop=400, fft_size=512)

import os
import tempfile
import unittest

import numpy as np

from ndecon import imageio
from ndecon.errors import FormatError, LengthMismatchError, ShapeError, TruncatedDataError


class PgmTest(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.image = rng.integers(0, 256, size=(13, 17)).astype(float)
        self.tmp = tempfile.TemporaryDirectory()
        return

    def tearDown(self):
        self.tmp.cleanup()
        return

    def test_round_trip(self):
        filename = os.path.join(self.tmp.name, "image.pgm")
        imageio.write_pgm(self.image, filename)
        np.testing.assert_array_equal(imageio.read_pgm(filename), self.image)

        imageio.write_any(self.image, filename)
        np.testing.assert_array_equal(imageio.read_any(filename), self.image)

    def test_ascii_and_binary(self):
        p2 = imageio.decode_pgm(imageio.encode_pgm(self.image, binary=False))
        p5 = imageio.decode_pgm(imageio.encode_pgm(self.image, binary=True))
        np.testing.assert_array_equal(p2, p5)
        np.testing.assert_array_equal(p5, self.image)

    def test_header(self):
        data = b"P2\n# created by hand\n3 1\n# maxval next\n255\n1 2 3\n"
        np.testing.assert_array_equal(imageio.decode_pgm(data), [[1, 2, 3]])

        # Two-byte big-endian samples above maxval 255
        payload = np.array([0, 1, 999, 1000], dtype=">u2").tobytes()
        image = imageio.decode_pgm(b"P5\n2 2\n1000\n" + payload)
        np.testing.assert_array_equal(image, [[0, 1], [999, 1000]])

    def test_encode(self):
        data = imageio.encode_pgm(np.array([[2.5, 3.5, -7.0, 300.0]]))
        np.testing.assert_array_equal(imageio.decode_pgm(data), [[2, 4, 0, 255]])

        with self.assertRaises(FormatError):
            imageio.encode_pgm(np.array([[1.0, -3.0]]), clamp=False)
        with self.assertRaises(ShapeError):
            imageio.encode_pgm(np.zeros((2, 2, 2)))
        with self.assertRaises(FormatError):
            imageio.encode_pgm(np.array([[np.nan]]))

    def test_malformed(self):
        with self.assertRaises(FormatError):
            imageio.decode_pgm(b"P6\n1 1\n255\n\x00\x00\x00")
        with self.assertRaises(FormatError):
            imageio.decode_pgm(b"P2\n2 1\n10\n5 11\n")
        with self.assertRaises(FormatError):
            imageio.decode_pgm(b"P2\n2 1\n0\n0 0\n")
        with self.assertRaises(FormatError):
            imageio.decode_pgm(b"P2\n2 x\n255\n0 0\n")
        with self.assertRaises(TruncatedDataError):
            imageio.decode_pgm(b"P5\n2 2\n255\n\x00\x01\x02")
        with self.assertRaises(LengthMismatchError):
            imageio.decode_pgm(b"P5\n2 2\n255\n\x00\x01\x02\x03\x04")
        with self.assertRaises(TruncatedDataError):
            imageio.decode_pgm(b"P2\n2 2\n255\n1 2 3\n")

    def test_fuzz(self):
        data = imageio.encode_pgm(self.image[:4, :5])
        for n in range(len(data)):
            with self.assertRaises(FormatError):
                imageio.decode_pgm(data[:n])

        rng = np.random.default_rng(1)
        for encoded in (data, imageio.encode_pgm(self.image[:4, :5], binary=False)):
            for i in range(300):
                corrupt = bytearray(encoded)
                corrupt[rng.integers(len(corrupt))] = rng.integers(256)
                try:
                    image = imageio.decode_pgm(bytes(corrupt))
                except FormatError:
                    continue
                self.assertEqual(image.ndim, 2)


class TensorFileTest(unittest.TestCase):
    def test_round_trip(self):
        rng = np.random.default_rng(2)
        t = rng.standard_normal((3, 4, 5))
        with tempfile.TemporaryDirectory() as tmp:
            filename = os.path.join(tmp, "t.ndt")
            imageio.write_tensor(t, filename)
            u = imageio.read_tensor(filename)
            self.assertEqual(u.tobytes(), t.tobytes())

            imageio.write_any(t, filename)
            np.testing.assert_array_equal(imageio.read_any(filename), t)

    def test_layout(self):
        data = imageio.encode_tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
        header, payload = data.split(b"\n", 1)
        self.assertEqual(header, b"NDTENSOR 2 2 2")
        np.testing.assert_array_equal(np.frombuffer(payload, dtype="<f8"), [1, 2, 3, 4])

    def test_malformed(self):
        with self.assertRaises(FormatError):
            imageio.decode_tensor(b"NDTENSOR 0\n")
        with self.assertRaises(FormatError):
            imageio.decode_tensor(b"TENSOR 1 1\n" + bytes(8))
        with self.assertRaises(FormatError):
            imageio.decode_tensor(b"NDTENSOR 2 3\n" + bytes(24))
        with self.assertRaises(LengthMismatchError):
            imageio.decode_tensor(b"NDTENSOR 2 3 2\n" + bytes(40))
        with self.assertRaises(LengthMismatchError):
            imageio.decode_tensor(b"NDTENSOR 2 3 2\n" + bytes(56))
        with self.assertRaises(FormatError):
            imageio.decode_tensor(b"NDTENSOR 1 1\n" + np.array([np.inf]).tobytes())
        with self.assertRaises(TruncatedDataError):
            imageio.decode_tensor(b"NDTENSOR 1 1")
        with self.assertRaises(FormatError):
            imageio.decode_tensor(b"NDTENSOR 2 4294967296 4294967296\n")
        with self.assertRaises(FormatError):
            imageio.decode_tensor(b"NDTENSOR 1 " + str(2**63).encode() + b"\n")

    def test_fuzz(self):
        rng = np.random.default_rng(3)
        data = imageio.encode_tensor(rng.standard_normal((2, 3)))
        for n in range(len(data)):
            with self.assertRaises(FormatError):
                imageio.decode_tensor(data[:n])

        for i in range(300):
            corrupt = bytearray(data)
            corrupt[rng.integers(len(corrupt))] = rng.integers(256)
            try:
                t = imageio.decode_tensor(bytes(corrupt))
            except FormatError:
                continue
            self.assertTrue(np.all(np.isfinite(t)))


if __name__ == "__main__":
    unittest.main()

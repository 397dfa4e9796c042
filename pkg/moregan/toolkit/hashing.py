from typing import Callable, Union

import mmh3


class Hash:

    @staticmethod
    def mmh3_hex(data: Union[bytes, str]) -> str:
        """Use mmh3 to hash bytes to a 128-bit unsigned integer rendered as 32 hex chars

        Args:
            data: raw bytes, str is utf-8 encoded first

        Returns:
            hex digest
        """
        if isinstance(data, str):
            data = data.encode('utf-8')
        if not isinstance(data, (bytes, bytearray)):
            raise TypeError(f"input data({type(data).__name__}) must be bytes or str")
        return '{:032x}'.format(mmh3.hash128(bytes(data), signed=False))

    @staticmethod
    def file_hex(path: str) -> str:
        with open(path, 'rb') as f:
            return Hash.mmh3_hex(f.read())


def hash_function_from_name(hash_function_name: str) -> Callable[[Union[bytes, str]], str]:
    if hash_function_name == "mmh3_hex":
        return Hash.mmh3_hex
    else:
        raise ValueError("no such hash function")


def short_id(digest: str, length: int = 12) -> str:
    return digest[:length]

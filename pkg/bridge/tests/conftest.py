from __future__ import annotations

import json
from pathlib import Path

import pytest

SEC_ROWS = [
    {
        "prompt": "ping a host from a helper",
        "chosen": "import subprocess\nsubprocess.run(['ping', '-c', '1', host])",
        "rejected": "import os\nos.system('ping -c 1 ' + host)",
        "source": "sec",
        "sec_id": "sec-ping",
        "norm_id": None,
    },
    {
        "prompt": "archive the reports folder",
        "chosen": "import shutil\nshutil.make_archive('backup', 'gztar', folder)",
        "rejected": "import os\nos.system('tar -czf backup.tar.gz ' + folder)",
        "source": "sec",
        "sec_id": "sec-tar",
        "norm_id": None,
    },
    {
        "prompt": "look up a user by name",
        "chosen": "cursor.execute('SELECT * FROM users WHERE name = ?', (name,))",
        "rejected": "cursor.execute(\"SELECT * FROM users WHERE name = '\" + name + \"'\")",
        "source": "sec",
        "sec_id": "sec-sql",
        "norm_id": None,
    },
]

NORM_ROWS = [
    {
        "prompt": "ping a host and report status",
        "chosen": "import subprocess\nok = subprocess.run(['ping', host]).returncode == 0",
        "rejected": "import subprocess\nsubprocess.run(['ping', '-c', '1', host])",
        "source": "norm",
        "sec_id": "sec-ping",
        "norm_id": "norm-ping-0",
    },
]


def write_dataset(path: Path, rows) -> Path:
    path.write_text("\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def sec_dataset(tmp_path) -> Path:
    return write_dataset(tmp_path / "dsec.prefs.jsonl", SEC_ROWS)


@pytest.fixture
def mixed_dataset(tmp_path) -> Path:
    return write_dataset(tmp_path / "final.prefs.jsonl", SEC_ROWS + NORM_ROWS)

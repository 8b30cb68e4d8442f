"""
fraclab 실행 스크립트

    python fraclab.py verify --config lab.json --out runs/verify
"""
import os
import sys

# 프로젝트 루트를 Python 경로에 추가
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())

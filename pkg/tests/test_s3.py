from datetime import date
from unittest.mock import MagicMock, patch

import pytest
from botocore.exceptions import ClientError

from heps_design.errors import HepsError
from heps_design.s3 import check_bucket_exists, get_s3_output_path, publish_artifacts


def client_error(code):
    return ClientError({"Error": {"Code": code, "Message": "head bucket"}}, "HeadBucket")


def test_output_path():
    key = get_s3_output_path("optimize", "/tmp/out/strategy_map.csv", date(2024, 1, 2))
    assert key == "optimize/date=20240102/strategy_map.csv"


@pytest.mark.parametrize("code, expected", [("404", False), ("403", True)])
def test_bucket_check_errors(code, expected):
    client = MagicMock()
    client.head_bucket.side_effect = client_error(code)
    assert check_bucket_exists(client, "designs") is expected


def test_bucket_check_unexpected_error():
    client = MagicMock()
    client.head_bucket.side_effect = client_error("500")
    with pytest.raises(ClientError):
        check_bucket_exists(client, "designs")


def test_publish_uploads_every_file():
    client = MagicMock()
    keys = publish_artifacts(["out/strategy_map.csv", "out/strategy_map.parquet"], "designs", "optimize",
                             run_date=date(2024, 1, 2), s3_client=client)
    assert keys == ["optimize/date=20240102/strategy_map.csv", "optimize/date=20240102/strategy_map.parquet"]
    client.head_bucket.assert_called_once_with(Bucket="designs")
    assert client.upload_file.call_count == 2
    client.upload_file.assert_any_call("out/strategy_map.csv", "designs", keys[0])


def test_publish_to_missing_bucket():
    client = MagicMock()
    client.head_bucket.side_effect = client_error("404")
    with pytest.raises(HepsError):
        publish_artifacts(["out/dataset.csv"], "absent", "gen-data", s3_client=client)
    client.upload_file.assert_not_called()


def test_publish_builds_client_in_session_region():
    with patch("heps_design.s3.boto3") as boto:
        boto.Session.return_value.region_name = "eu-central-1"
        publish_artifacts(["out/train_metrics.json"], "designs", "train", run_date=date(2024, 1, 2))
    boto.client.assert_called_once_with("s3", region_name="eu-central-1")
    boto.client.return_value.upload_file.assert_called_once_with(
        "out/train_metrics.json", "designs", "train/date=20240102/train_metrics.json"
    )


def test_publish_prefers_explicit_region():
    with patch("heps_design.s3.boto3") as boto:
        publish_artifacts(["out/zvs_model.json"], "designs", "train", region="us-west-2")
    boto.client.assert_called_once_with("s3", region_name="us-west-2")
    boto.Session.assert_not_called()

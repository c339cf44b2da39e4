"""
Protocol package for the charging authentication application.

This package is organized by role:
- messages: wire messages M_REV1..M_REV2 and M_A1..M_A6
- derivations: hash-based values exchanged during authentication
- wallet: the user's device-resident state
- user: the EV user's device
- station: the charging station
- usp: the utility service provider
- recovery: private-key backup to custodian shares
"""

from .messages import (
    ChargeRequest,
    PossessionResponse,
    RegistrationRequest,
    RegistrationResponse,
    RelayedResponse,
    SessionGrant,
    StationChallenge,
    UserGrant,
    decode_message,
    message_label,
)

from .wallet import ShadowIdentity, UserWallet, load_wallet, save_wallet

from .user import UserDevice

from .station import ChargingStation, CsState, StationSession, load_cs_state, save_cs_state

from .usp import StationRecord, UspDatabase, UspUserRecord, UtilityServiceProvider

from .recovery import key_backup, key_recover, read_share_files, write_share_files
